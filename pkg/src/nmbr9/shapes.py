"""Polyomino geometry for the digit parts.

Shapes are immutable, normalized cell sets. Only rotations are allowed
transforms; reflections never occur in the game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

Cell = tuple[int, int]

NEIGHBOURS = ((-1, 0), (0, -1), (0, 1), (1, 0))


class CatalogError(ValueError):
    """Base class for shape catalog parse errors."""

    def __init__(self, message: str, digit: int | None = None, line: int | None = None):
        where = []
        if digit is not None:
            where.append(f"digit {digit}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.digit = digit
        self.line = line


class MalformedLineError(CatalogError):
    pass


class DisconnectedShapeError(CatalogError):
    pass


class DuplicateDigitError(CatalogError):
    pass


class DigitRangeError(CatalogError):
    pass


def _normalize(cells: Iterable[Cell]) -> frozenset[Cell]:
    cells = list(cells)
    r0 = min(r for r, _ in cells)
    c0 = min(c for _, c in cells)
    return frozenset((r - r0, c - c0) for r, c in cells)


def is_connected(cells: Iterable[Cell]) -> bool:
    cells = set(cells)
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        r, c = stack.pop()
        for dr, dc in NEIGHBOURS:
            nb = (r + dr, c + dc)
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cells)


@dataclass(frozen=True)
class Shape:
    """A normalized polyomino: unit cells as (row, col) offsets from the top-left."""

    cells: frozenset[Cell]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("shape must have at least one cell")
        if min(r for r, _ in self.cells) != 0 or min(c for _, c in self.cells) != 0:
            raise ValueError("shape cells are not normalized")
        if not is_connected(self.cells):
            raise ValueError("shape cells are not 4-connected")

    @classmethod
    def from_cells(cls, cells: Iterable[Cell]) -> "Shape":
        return cls(_normalize(cells))

    @classmethod
    def from_rows(cls, rows: Iterable[str]) -> "Shape":
        """Build from row strings where ``#`` marks a cell."""
        cells = [(r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == "#"]
        if not cells:
            raise ValueError("shape must have at least one cell")
        return cls.from_cells(cells)

    @property
    def height(self) -> int:
        return 1 + max(r for r, _ in self.cells)

    @property
    def width(self) -> int:
        return 1 + max(c for _, c in self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def rows(self) -> list[str]:
        return [
            "".join("#" if (r, c) in self.cells else "." for c in range(self.width))
            for r in range(self.height)
        ]

    def __str__(self) -> str:
        return "/".join(self.rows())


def rotate90(shape: Shape) -> Shape:
    """Rotate a quarter turn clockwise: (r, c) -> (c, maxRow - r)."""
    max_row = shape.height - 1
    return Shape.from_cells((c, max_row - r) for r, c in shape.cells)


@dataclass(frozen=True)
class OrientationSet:
    shapes: tuple[Shape, ...]

    def __len__(self) -> int:
        return len(self.shapes)

    def __iter__(self):
        return iter(self.shapes)

    def __getitem__(self, i: int) -> Shape:
        return self.shapes[i]


def distinct_orientations(shape: Shape) -> OrientationSet:
    """Rotations by 0, 90, 180 and 270 degrees with duplicates dropped, in that order."""
    out: list[Shape] = []
    current = shape
    for _ in range(4):
        if current not in out:
            out.append(current)
        current = rotate90(current)
    return OrientationSet(tuple(out))


def _outside_cells(shape: Shape) -> set[Cell]:
    # flood fill of empty cells from outside the bounding box, 1-cell margin
    h, w = shape.height, shape.width
    start = (-1, -1)
    seen = {start}
    stack = [start]
    while stack:
        r, c = stack.pop()
        for dr, dc in NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if -1 <= nr <= h and -1 <= nc <= w and (nr, nc) not in shape.cells and (nr, nc) not in seen:
                seen.add((nr, nc))
                stack.append((nr, nc))
    return seen


def exterior_halo(shape: Shape) -> frozenset[Cell]:
    """Empty cells orthogonally adjacent to the shape and reachable from outside it.

    Enclosed hole cells are excluded. Offsets may be -1.
    """
    outside = _outside_cells(shape)
    halo = set()
    for r, c in shape.cells:
        for dr, dc in NEIGHBOURS:
            nb = (r + dr, c + dc)
            if nb in outside:
                halo.add(nb)
    return frozenset(halo)


def holes(shape: Shape) -> list[frozenset[Cell]]:
    """Connected components of empty cells enclosed by the shape."""
    outside = _outside_cells(shape)
    enclosed = {
        (r, c)
        for r in range(shape.height)
        for c in range(shape.width)
        if (r, c) not in shape.cells and (r, c) not in outside
    }
    comps = []
    while enclosed:
        start = enclosed.pop()
        comp = {start}
        stack = [start]
        while stack:
            r, c = stack.pop()
            for dr, dc in NEIGHBOURS:
                nb = (r + dr, c + dc)
                if nb in enclosed:
                    enclosed.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(frozenset(comp))
    return sorted(comps, key=sorted)


def fits_inside(shape: Shape, region: frozenset[Cell]) -> bool:
    """Whether some orientation and translation of ``shape`` lies within ``region``."""
    for orient in distinct_orientations(shape):
        for r0, c0 in region:
            if all((r0 + r, c0 + c) in region for r, c in orient.cells):
                return True
    return False


RING = Shape.from_rows(["###", "#.#", "#.#", "###"])


@dataclass(frozen=True, eq=False)
class ShapeCatalog:
    shapes: Mapping[int, Shape]
    source: str = "default"
    _orientations: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for digit in self.shapes:
            if not 0 <= digit <= 9:
                raise DigitRangeError("digit outside 0..9", digit=digit)
        if 0 in self.shapes and self.shapes[0] != RING:
            raise CatalogError(f"digit-0 shape must be the ring {RING}, got {self.shapes[0]}", digit=0)
        for digit, shape in self.shapes.items():
            for hole in holes(shape):
                for other_digit, other in self.shapes.items():
                    if fits_inside(other, hole):
                        raise CatalogError(
                            f"digit {other_digit} fits inside an enclosed hole of this shape",
                            digit=digit,
                        )

    def __getitem__(self, digit: int) -> Shape:
        return self.shapes[digit]

    def __contains__(self, digit: int) -> bool:
        return digit in self.shapes

    def digits(self) -> list[int]:
        return sorted(self.shapes)

    def orientations(self, digit: int) -> OrientationSet:
        if digit not in self._orientations:
            self._orientations[digit] = distinct_orientations(self.shapes[digit])
        return self._orientations[digit]

    def dumps(self) -> str:
        blocks = []
        for d in self.digits():
            blocks.append("\n".join([f"digit {d}", *self.shapes[d].rows()]))
        return "\n\n".join(blocks) + "\n"


def parse_catalog(text: str, source: str = "<string>") -> ShapeCatalog:
    """Parse the catalog text format.

    Blocks start with a ``digit <d>`` header followed by rows of ``#`` and
    ``.``; blocks are separated by blank lines. Short rows are padded with
    ``.`` on the right.
    """
    shapes: dict[int, Shape] = {}
    digit: int | None = None
    header_line = 0
    rows: list[str] = []

    def finish():
        if digit is None:
            return
        cells = [(r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == "#"]
        if not cells:
            raise MalformedLineError("shape has no cells", digit=digit, line=header_line)
        if not is_connected(cells):
            raise DisconnectedShapeError("shape is not 4-connected", digit=digit, line=header_line)
        shapes[digit] = Shape.from_cells(cells)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            finish()
            digit, rows = None, []
            continue
        if line.startswith("digit"):
            finish()
            parts = line.split()
            if len(parts) != 2 or not parts[1].lstrip("-").isdigit():
                raise MalformedLineError(f"bad header {line!r}", line=lineno)
            d = int(parts[1])
            if not 0 <= d <= 9:
                raise DigitRangeError("digit outside 0..9", digit=d, line=lineno)
            if d in shapes:
                raise DuplicateDigitError("digit defined twice", digit=d, line=lineno)
            digit, header_line, rows = d, lineno, []
            continue
        if digit is None:
            raise MalformedLineError(f"grid row outside a digit block: {line!r}", line=lineno)
        if set(line) - {"#", "."}:
            raise MalformedLineError(f"grid row may only contain '#' and '.': {line!r}", digit=digit, line=lineno)
        rows.append(line)
    finish()
    return ShapeCatalog(shapes, source=source)


def load_catalog(path=None) -> ShapeCatalog:
    """Load a catalog file, or the bundled default when ``path`` is None."""
    if path is None:
        text = resources.files("nmbr9.data").joinpath("default_catalog.txt").read_text(encoding="utf-8")
        return parse_catalog(text, source="default")
    with open(path, encoding="utf-8") as f:
        return parse_catalog(f.read(), source=str(path))


_DEFAULT: ShapeCatalog | None = None


def default_catalog() -> ShapeCatalog:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT
