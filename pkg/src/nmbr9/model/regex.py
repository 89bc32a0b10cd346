"""Placement regular expressions over the grid alphabet {0, 1, 2}.

A part's placement word is a control symbol followed by the row-major grid:
``0`` empty, ``1`` occupied by the part, ``2`` exterior halo around it. The
expression for a part is::

    1 0* (body_0 | body_1 | ...) 0* | 0 0*

where each body spells one orientation from its top halo cell to its bottom
halo cell, with the zero run between consecutive rows written relative to
the grid width (``0^{s-4}`` and so on).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..shapes import OrientationSet, Shape, exterior_halo

ALPHABET = "012"


@dataclass(frozen=True)
class Sym:
    ch: str


@dataclass(frozen=True)
class Cat:
    items: tuple["Node", ...]


@dataclass(frozen=True)
class Alt:
    items: tuple["Node", ...]


@dataclass(frozen=True)
class Rep:
    """``node`` repeated lo..hi times (``hi=None`` is unbounded).

    ``offset`` marks a grid-relative run: the count is ``s - offset``.
    """

    node: "Node"
    lo: int
    hi: int | None
    offset: int | None = None


Node = Union[Sym, Cat, Alt, Rep]


def star(node: Node) -> Rep:
    return Rep(node, 0, None)


def exactly(node: Node, n: int, offset: int | None = None) -> Rep:
    return Rep(node, n, n, offset)


def _exp(n: int | str) -> str:
    n = str(n)
    return "^" + n if len(n) == 1 else "^{" + n + "}"


def to_text(node: Node, symbolic: bool = True) -> str:
    """Render in the compact ``2^30^{s-4}21^32`` notation."""
    if isinstance(node, Sym):
        return node.ch
    if isinstance(node, Cat):
        parts = []
        for item in node.items:
            text = to_text(item, symbolic)
            parts.append(f"({text})" if isinstance(item, Alt) else text)
        return "".join(parts)
    if isinstance(node, Alt):
        return "|".join(to_text(i, symbolic) for i in node.items)
    inner = to_text(node.node, symbolic)
    if not isinstance(node.node, Sym):
        inner = f"({inner})"
    if node.hi is None:
        return inner + ("^*" if node.lo == 0 else f"^{{{node.lo},}}")
    if node.lo != node.hi:
        return inner + f"^{{{node.lo},{node.hi}}}"
    if node.offset is not None and symbolic:
        return inner + _exp(f"s-{node.offset}")
    return inner if node.lo == 1 else inner + _exp(node.lo)


def _runs(symbols: list[str]) -> list[Node]:
    out: list[Node] = []
    i = 0
    while i < len(symbols):
        j = i
        while j < len(symbols) and symbols[j] == symbols[i]:
            j += 1
        n = j - i
        out.append(Sym(symbols[i]) if n == 1 else exactly(Sym(symbols[i]), n))
        i = j
    return out


def body(shape: Shape, s: int) -> Node:
    """Row-major body for one orientation, halo rows included, zero gaps grid-relative."""
    halo = exterior_halo(shape)
    rows = []
    for r in range(-1, shape.height + 1):
        line = []
        for c in range(-1, shape.width + 1):
            if (r, c) in shape.cells:
                line.append("1")
            elif (r, c) in halo:
                line.append("2")
            else:
                line.append("0")
        first = next(i for i, ch in enumerate(line) if ch != "0")
        last = max(i for i, ch in enumerate(line) if ch != "0")
        # box column of first/last non-zero symbol (box starts at column -1)
        rows.append((tuple(line[first:last + 1]), first - 1, last - 1))

    units: list[tuple[tuple[str, ...], int | None]] = []
    for i, (span, _, last) in enumerate(rows):
        if i + 1 < len(rows):
            units.append((span, 1 + last - rows[i + 1][1]))
        else:
            units.append((span, None))

    def unit_nodes(span, offset) -> list[Node]:
        nodes = _runs(list(span))
        if offset is not None:
            gap = s - offset
            if gap < 0:
                raise ValueError(f"shape {shape} too large for grid {s}")
            if gap > 0:
                nodes.append(exactly(Sym("0"), gap, offset))
        return nodes

    items: list[Node] = []
    i = 0
    while i < len(units):
        j = i
        while j + 1 < len(units) and units[j + 1] == units[i]:
            j += 1
        count = j - i + 1
        nodes = unit_nodes(*units[i])
        if count > 1:
            items.append(exactly(Cat(tuple(nodes)), count))
        else:
            items.extend(nodes)
        i = j + 1
    return Cat(tuple(items))


@dataclass(frozen=True)
class PlacementRegex:
    """Placement expression for one digit on an s x s grid.

    Its language is read together with the grid border: word positions in
    column 0 or s-1 never hold a ``1``.
    """

    node: Node
    digit: int | None
    s: int
    orientations: OrientationSet

    @property
    def word_length(self) -> int:
        return 1 + self.s * self.s

    def text(self, symbolic: bool = True) -> str:
        return to_text(self.node, symbolic)

    def __str__(self) -> str:
        return self.text()


def build_regex(orientations: OrientationSet, s: int, digit: int | None = None,
                strict: bool = True) -> PlacementRegex:
    """Placement expression for a part with the given orientations.

    With ``strict=False`` a shape too large for the grid yields the
    expression of a part that can never be placed (``0 0*``) instead of
    raising.
    """
    fits = [shape for shape in orientations if max(shape.height, shape.width) + 2 <= s]
    if strict and len(fits) < len(orientations):
        raise ValueError(f"shape {orientations[0]} does not fit in a {s}x{s} grid with a 1-cell margin")
    absent = Cat((Sym("0"), star(Sym("0"))))
    if not fits:
        return PlacementRegex(absent, digit, s, orientations)
    bodies = tuple(body(shape, s) for shape in fits)
    placed = Cat((Sym("1"), star(Sym("0")), bodies[0] if len(bodies) == 1 else Alt(bodies), star(Sym("0"))))
    return PlacementRegex(Alt((placed, absent)), digit, s, orientations)
