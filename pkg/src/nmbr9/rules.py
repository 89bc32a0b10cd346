"""Game semantics: variants, instances, decks, board states, legality and scoring.

Grids are s x s with row-major bit indices ``r * s + c``. Every occupied
cell and every halo cell of a part must lie inside the grid, so parts never
touch the border row/column.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterator, Sequence

from .shapes import ShapeCatalog, default_catalog, exterior_halo

DEFAULT_GRID = 20
DEFAULT_LEVELS = 7

_VARIANT_RE = re.compile(r"^\s*([A-Za-z])-(\d+)-(\d+)-(\d+)\s*$")


class VariantError(ValueError):
    pass


class InstanceError(ValueError):
    pass


class IllegalPlacementError(ValueError):
    pass


def max_deck_length(m: int, c: int) -> int:
    # digits 0..m number m+1
    return (m + 1) * c


def parse_variant(text: str) -> tuple[str, int, int, int]:
    """Parse ``T-m-c-k`` into ``(kind, m, c, k)``; only F and K are supported."""
    match = _VARIANT_RE.match(text)
    if not match:
        raise VariantError(f"malformed variant {text!r}; expected T-m-c-k, e.g. F-6-1-5")
    kind = match.group(1).upper()
    m, c, k = (int(g) for g in match.groups()[1:])
    if kind == "U":
        raise VariantError(f"unsupported variant kind 'U' in {text!r} (only F and K)")
    if kind not in ("F", "K"):
        raise VariantError(f"unknown variant kind {kind!r} in {text!r}")
    if not 0 <= m <= 9:
        raise VariantError(f"max digit m={m} outside 0..9")
    if c < 1:
        raise VariantError(f"copies c={c} must be at least 1")
    if not 1 <= k <= max_deck_length(m, c):
        raise VariantError(f"deck length k={k} outside 1..(m+1)*c = {max_deck_length(m, c)}")
    return kind, m, c, k


def parse_deck(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise VariantError(f"malformed deck literal {text!r}; expected comma-separated digits") from None


def validate_deck(deck: Sequence[int], m: int, c: int, k: int) -> str | None:
    """Return None if ``deck`` is a valid draw sequence, else a description of the violation."""
    if len(deck) != k:
        return f"deck length {len(deck)} != k={k}"
    for d in deck:
        if not 0 <= d <= m:
            return f"digit {d} outside 0..{m}"
    for d, n in sorted(Counter(deck).items()):
        if n > c:
            return f"digit {d} occurs {n} times, more than c={c} copies"
    return None


@dataclass(frozen=True)
class Instance:
    kind: str
    m: int
    c: int
    k: int
    s: int = DEFAULT_GRID
    l_top: int = DEFAULT_LEVELS
    deck: tuple[int, ...] | None = None
    catalog: ShapeCatalog = field(default_factory=default_catalog, compare=False)

    def __post_init__(self):
        if self.kind not in ("F", "K"):
            raise InstanceError(f"unsupported variant kind {self.kind!r}")
        if not 0 <= self.m <= 9 or self.c < 1:
            raise InstanceError(f"bad parameters m={self.m}, c={self.c}")
        if not 1 <= self.k <= self.n:
            raise InstanceError(f"deck length k={self.k} outside 1..(m+1)*c = {self.n}")
        if self.l_top < 1:
            raise InstanceError("l_top must be at least 1")
        for d in range(self.m + 1):
            if d not in self.catalog:
                raise InstanceError(f"catalog {self.catalog.source!r} has no shape for digit {d}")
            shape = self.catalog[d]
            if max(shape.height, shape.width) + 2 > self.s:
                raise InstanceError(f"grid s={self.s} too small for digit {d} ({shape.width}x{shape.height}) with margin")
        if self.kind == "K":
            if self.deck is None:
                raise InstanceError("K instances need a deck")
            object.__setattr__(self, "deck", tuple(self.deck))
            problem = validate_deck(self.deck, self.m, self.c, self.k)
            if problem:
                raise InstanceError(f"invalid deck: {problem}")
        elif self.deck is not None:
            raise InstanceError("F instances choose their deck freely; no deck allowed")

    @classmethod
    def from_variant(cls, variant: str, *, deck=None, s: int = DEFAULT_GRID,
                     l_top: int = DEFAULT_LEVELS, catalog: ShapeCatalog | None = None) -> "Instance":
        try:
            kind, m, c, k = parse_variant(variant)
        except VariantError as exc:
            raise InstanceError(str(exc)) from None
        if isinstance(deck, str):
            deck = parse_deck(deck)
        return cls(kind, m, c, k, s=s, l_top=l_top, deck=tuple(deck) if deck is not None else None,
                   catalog=catalog or default_catalog())

    @property
    def n(self) -> int:
        return (self.m + 1) * self.c

    @property
    def variant(self) -> str:
        return f"{self.kind}-{self.m}-{self.c}-{self.k}"

    def part_id(self, digit: int, copy: int) -> int:
        """Parts are numbered 1..n; copies of a digit are consecutive."""
        return digit * self.c + copy

    def part_of(self, pid: int) -> tuple[int, int]:
        return (pid - 1) // self.c, (pid - 1) % self.c + 1

    def with_deck(self, deck: Sequence[int]) -> "Instance":
        return Instance("K", self.m, self.c, self.k, self.s, self.l_top, tuple(deck), self.catalog)

    def geometry(self) -> "Geometry":
        return geometry(self.catalog, self.s)

    def echo(self) -> dict:
        return {
            "variant": self.variant,
            "deck": list(self.deck) if self.deck is not None else None,
            "grid": self.s,
            "levels": self.l_top,
            "catalog": self.catalog.source,
        }


@dataclass(frozen=True)
class Anchor:
    """One orientation of a digit at one grid position, as bit masks."""

    orientation: int
    row: int
    col: int
    cells: int
    halo: int


class Geometry:
    """Precomputed margin-respecting anchors for every digit on an s x s grid."""

    def __init__(self, catalog: ShapeCatalog, s: int):
        self.catalog = catalog
        self.s = s
        self._anchors: dict[int, tuple[Anchor, ...]] = {}
        self._index: dict[int, dict] = {}

    def bit(self, r: int, c: int) -> int:
        return 1 << (r * self.s + c)

    def mask(self, cells) -> int:
        m = 0
        for r, c in cells:
            m |= 1 << (r * self.s + c)
        return m

    def cells_of(self, mask: int) -> list[tuple[int, int]]:
        out = []
        while mask:
            low = mask & -mask
            i = low.bit_length() - 1
            out.append(divmod(i, self.s))
            mask ^= low
        return out

    def anchors(self, digit: int) -> tuple[Anchor, ...]:
        """Anchors sorted by (orientation, row, col)."""
        if digit not in self._anchors:
            s = self.s
            out = []
            for oi, shape in enumerate(self.catalog.orientations(digit)):
                halo = exterior_halo(shape)
                for r in range(1, s - shape.height):
                    for c in range(1, s - shape.width):
                        out.append(Anchor(
                            oi, r, c,
                            self.mask((r + dr, c + dc) for dr, dc in shape.cells),
                            self.mask((r + dr, c + dc) for dr, dc in halo),
                        ))
            self._anchors[digit] = tuple(out)
        return self._anchors[digit]

    def anchor(self, digit: int, orientation: int, row: int, col: int) -> Anchor | None:
        if digit not in self._index:
            self._index[digit] = {(a.orientation, a.row, a.col): a for a in self.anchors(digit)}
        return self._index[digit].get((orientation, row, col))


@lru_cache(maxsize=64)
def geometry(catalog: ShapeCatalog, s: int) -> Geometry:
    return Geometry(catalog, s)


@dataclass(frozen=True, order=True)
class Placement:
    card_index: int
    digit: int
    copy: int
    level: int
    orientation: int
    row: int
    col: int

    def sort_key(self) -> tuple[int, int, int, int]:
        return (self.level, self.orientation, self.row, self.col)

    def as_dict(self) -> dict:
        return {
            "card_index": self.card_index, "digit": self.digit, "copy": self.copy,
            "level": self.level, "orientation": self.orientation,
            "row": self.row, "col": self.col,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Placement":
        return cls(**{k: int(d[k]) for k in ("card_index", "digit", "copy", "level", "orientation", "row", "col")})


@dataclass(frozen=True)
class BoardState:
    """Immutable stacked board. ``levels[l-1]`` holds ``(part_id, cell_mask)`` pairs."""

    instance: Instance
    deck: tuple[int, ...] | None
    levels: tuple[tuple[tuple[int, int], ...], ...]
    occupancy: tuple[int, ...]
    placements: tuple[Placement, ...] = ()

    @classmethod
    def empty(cls, instance: Instance, deck: Sequence[int] | None = None) -> "BoardState":
        if deck is None:
            deck = instance.deck
        else:
            deck = tuple(deck)
            problem = validate_deck(deck, instance.m, instance.c, instance.k)
            if problem:
                raise InstanceError(f"invalid deck: {problem}")
        l_top = instance.l_top
        return cls(instance, deck, ((),) * l_top, (0,) * l_top, ())

    @property
    def next_card(self) -> int:
        """1-based index of the next card to draw."""
        return len(self.placements) + 1

    @property
    def is_terminal(self) -> bool:
        return len(self.placements) == self.instance.k

    def next_digit(self) -> int | None:
        if self.deck is None or self.is_terminal:
            return None
        return self.deck[len(self.placements)]

    def copies_used(self, digit: int) -> int:
        return sum(1 for p in self.placements if p.digit == digit)

    def level_of(self, pid: int) -> int:
        for li, parts in enumerate(self.levels):
            for q, _ in parts:
                if q == pid:
                    return li + 1
        return 0

    def area(self, level: int) -> int:
        return bin(self.occupancy[level - 1]).count("1")

    def grid(self, level: int) -> list[list[int]]:
        """Part-id grid for one level (0 = empty)."""
        s = self.instance.s
        g = [[0] * s for _ in range(s)]
        geo = self.instance.geometry()
        for pid, mask in self.levels[level - 1]:
            for r, c in geo.cells_of(mask):
                g[r][c] = pid
        return g

    def top_level(self) -> int:
        top = 0
        for li, occ in enumerate(self.occupancy):
            if occ:
                top = li + 1
        return top


def _check(state: BoardState, level: int, anchor: Anchor) -> bool:
    occ = state.occupancy
    li = level - 1
    if anchor.cells & occ[li]:
        return False
    if occ[li] and not anchor.halo & occ[li]:
        return False
    if level >= 2:
        if anchor.cells & ~occ[li - 1]:
            return False
        under = 0
        for _, mask in state.levels[li - 1]:
            if mask & anchor.cells:
                under += 1
                if under >= 2:
                    break
        if under < 2:
            return False
    return True


def legal_placements(state: BoardState, digit: int) -> list[Placement]:
    """All legal placements of ``digit`` as the next card, sorted by (level, orientation, row, col)."""
    inst = state.instance
    if not 0 <= digit <= inst.m or state.is_terminal:
        return []
    copy = state.copies_used(digit) + 1
    if copy > inst.c:
        return []
    card = state.next_card
    anchors = inst.geometry().anchors(digit)
    out = []
    max_level = min(inst.l_top, state.top_level() + 1)
    for level in range(1, max_level + 1):
        if level >= 2 and len(state.levels[level - 2]) < 2:
            continue
        for a in anchors:
            if _check(state, level, a):
                out.append(Placement(card, digit, copy, level, a.orientation, a.row, a.col))
    return out


def apply(state: BoardState, placement: Placement) -> BoardState:
    """Return a new state with ``placement`` committed; ``state`` is unchanged."""
    inst = state.instance
    if state.is_terminal:
        raise IllegalPlacementError("all cards have been placed")
    if placement.card_index != state.next_card:
        raise IllegalPlacementError(f"placement is for card {placement.card_index}, next card is {state.next_card}")
    expected = state.next_digit()
    if expected is not None and placement.digit != expected:
        raise IllegalPlacementError(f"card {state.next_card} is digit {expected}, not {placement.digit}")
    if not 0 <= placement.digit <= inst.m:
        raise IllegalPlacementError(f"digit {placement.digit} outside 0..{inst.m}")
    copy = state.copies_used(placement.digit) + 1
    if copy > inst.c or placement.copy != copy:
        raise IllegalPlacementError(f"digit {placement.digit} copy {placement.copy} unavailable (next copy {copy})")
    if not 1 <= placement.level <= inst.l_top:
        raise IllegalPlacementError(f"level {placement.level} outside 1..{inst.l_top}")
    anchor = inst.geometry().anchor(placement.digit, placement.orientation, placement.row, placement.col)
    if anchor is None:
        raise IllegalPlacementError(f"{placement} does not fit inside the grid margin")
    if not _check(state, placement.level, anchor):
        raise IllegalPlacementError(f"{placement} violates overlap, support, connectivity or two-parts rules")
    return _commit(state, placement, anchor.cells)


def _commit(state: BoardState, placement: Placement, cells: int) -> BoardState:
    li = placement.level - 1
    pid = state.instance.part_id(placement.digit, placement.copy)
    levels = list(state.levels)
    levels[li] = levels[li] + ((pid, cells),)
    occ = list(state.occupancy)
    occ[li] |= cells
    return BoardState(state.instance, state.deck, tuple(levels), tuple(occ), state.placements + (placement,))


def replay(instance: Instance, placements: Sequence[Placement], deck: Sequence[int] | None = None) -> BoardState:
    if deck is None and instance.deck is None:
        deck = [p.digit for p in placements] if len(placements) == instance.k else None
    state = BoardState.empty(instance, deck)
    for p in placements:
        state = apply(state, p)
    return state


def score(state: BoardState) -> int:
    """Sum over placed parts of digit value times (level - 1)."""
    return sum(p.digit * (p.level - 1) for p in state.placements)


def enumerate_decks(instance: Instance) -> Iterator[tuple[int, ...]]:
    """All valid F decks in lexicographic order; copies of a digit are indistinguishable."""
    if instance.kind != "F":
        raise InstanceError("deck enumeration is for F instances")
    m, c, k = instance.m, instance.c, instance.k
    left = [c] * (m + 1)
    prefix: list[int] = []

    def rec():
        if len(prefix) == k:
            yield tuple(prefix)
            return
        for d in range(m + 1):
            if left[d]:
                left[d] -= 1
                prefix.append(d)
                yield from rec()
                prefix.pop()
                left[d] += 1

    yield from rec()


def deck_count(m: int, c: int, k: int) -> int:
    """Number of length-k digit sequences over 0..m using each digit at most c times."""
    # k! * [x^k] (sum_{j<=c} x^j / j!)^(m+1)
    poly = [Fraction(1)]
    term = [Fraction(1, factorial(j)) for j in range(c + 1)]
    for _ in range(m + 1):
        nxt = [Fraction(0)] * min(len(poly) + c, k + 1)
        for i, a in enumerate(poly):
            for j, b in enumerate(term):
                if i + j <= k:
                    nxt[i + j] += a * b
        poly = nxt
    if k >= len(poly):
        return 0
    return int(poly[k] * factorial(k))
