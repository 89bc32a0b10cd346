"""Brute-force reference enumeration for desk-sized instances.

Plain depth-first search over decks and legal placements with no pruning.
Terminal states are re-checked from scratch by :func:`check_state`, which
works on explicit cell grids and never looks at the engine's bit masks.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .rules import BoardState, Instance, apply, enumerate_decks, legal_placements, score


class BudgetExceeded(RuntimeError):
    pass


class InvalidState(AssertionError):
    pass


def _components(cells: set[tuple[int, int]]) -> int:
    left = set(cells)
    n = 0
    while left:
        n += 1
        stack = [left.pop()]
        while stack:
            r, c = stack.pop()
            for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if nb in left:
                    left.remove(nb)
                    stack.append(nb)
    return n


def check_state(state: BoardState) -> None:
    """Re-validate every board invariant from the placement list alone.

    Raises InvalidState on the first problem found.
    """
    inst = state.instance
    s = inst.s
    cat = inst.catalog
    grids = [dict() for _ in range(inst.l_top + 1)]  # level -> {(r, c): (digit, copy)}
    copies = Counter()
    for n_placed, p in enumerate(state.placements, start=1):
        if p.card_index != n_placed:
            raise InvalidState(f"card index {p.card_index} at position {n_placed}")
        if state.deck is not None and state.deck[n_placed - 1] != p.digit:
            raise InvalidState(f"card {n_placed} should be digit {state.deck[n_placed - 1]}")
        copies[p.digit] += 1
        if p.copy != copies[p.digit] or copies[p.digit] > inst.c:
            raise InvalidState(f"bad copy number for {p}")
        shapes = cat.orientations(p.digit)
        if not 0 <= p.orientation < len(shapes) or not 1 <= p.level <= inst.l_top:
            raise InvalidState(f"bad orientation or level in {p}")
        cells = [(p.row + r, p.col + c) for r, c in shapes[p.orientation].cells]
        if any(not (1 <= r <= s - 2 and 1 <= c <= s - 2) for r, c in cells):
            raise InvalidState(f"{p} touches the border")
        grid = grids[p.level]
        if any(cell in grid for cell in cells):
            raise InvalidState(f"{p} overlaps a part on level {p.level}")
        if grid:
            touching = any(
                nb in grid
                for r, c in cells
                for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
            )
            if not touching:
                raise InvalidState(f"{p} is not 4-adjacent to its level")
        if p.level >= 2:
            below = grids[p.level - 1]
            if any(cell not in below for cell in cells):
                raise InvalidState(f"{p} is not fully supported")
            if len({below[cell] for cell in cells}) < 2:
                raise InvalidState(f"{p} rests on fewer than two parts")
        for cell in cells:
            grid[cell] = (p.digit, p.copy)
        if _components(set(grid)) != 1:
            raise InvalidState(f"level {p.level} is disconnected after {p}")

    for level in range(1, inst.l_top + 1):
        expected = {}
        for pid, mask in state.levels[level - 1]:
            for cell in inst.geometry().cells_of(mask):
                expected[cell] = inst.part_of(pid)
        if expected != grids[level]:
            raise InvalidState(f"engine grid for level {level} disagrees with the placement list")
        if level >= 2 and len(grids[level]) > len(grids[level - 1]):
            raise InvalidState(f"level {level} has more area than level {level - 1}")


def independent_score(state: BoardState) -> int:
    return sum(p.digit * (p.level - 1) for p in state.placements)


@dataclass
class EnumerationReport:
    instance: dict
    terminals: int = 0
    max_score: int | None = None
    optimal_count: int = 0
    nodes: int = 0
    partial: bool = False
    states: list[BoardState] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "instance": self.instance,
            "terminals": self.terminals,
            "max_score": self.max_score,
            "optimal_count": self.optimal_count,
            "nodes": self.nodes,
            "partial": self.partial,
        }


def enumerate_terminals(instance: Instance, visitor: Callable[[BoardState], None],
                        cap: int | None = None, revalidate: bool = True) -> int:
    """Call ``visitor`` once per terminal state, in deterministic order.

    Returns the number of search nodes; raises BudgetExceeded after ``cap`` nodes.
    """
    nodes = 0

    def rec(state: BoardState):
        nonlocal nodes
        nodes += 1
        if cap is not None and nodes > cap:
            raise BudgetExceeded(f"node budget {cap} exhausted")
        if state.is_terminal:
            if revalidate:
                check_state(state)
            visitor(state)
            return
        for p in legal_placements(state, state.next_digit()):
            rec(apply(state, p))

    if instance.kind == "K":
        rec(BoardState.empty(instance))
    else:
        for deck in enumerate_decks(instance):
            rec(BoardState.empty(instance, deck))
    return nodes


def best_score_bruteforce(instance: Instance, cap: int | None = None, keep: int = 0,
                          revalidate: bool = True) -> EnumerationReport:
    """Exact maximum score by exhaustive enumeration.

    ``keep`` terminal states are retained in the report. When the node
    budget runs out the report is marked partial.
    """
    report = EnumerationReport(instance.echo())

    def visit(state: BoardState):
        value = independent_score(state)
        if value != score(state):
            raise InvalidState("engine score disagrees with recount")
        report.terminals += 1
        if report.max_score is None or value > report.max_score:
            report.max_score = value
            report.optimal_count = 1
        elif value == report.max_score:
            report.optimal_count += 1
        if len(report.states) < keep:
            report.states.append(state)

    try:
        report.nodes = enumerate_terminals(instance, visit, cap=cap, revalidate=revalidate)
    except BudgetExceeded:
        report.partial = True
        report.nodes = cap
    return report
