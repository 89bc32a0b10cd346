"""Exact branch-and-bound maximization of the score for F and K instances.

Search is depth-first: for each card, first the digit (F only, ascending),
then the placement, trying higher levels first and within a level the
canonical (orientation, row, col) order. A subtree is cut when its upper
bound cannot beat the incumbent, so the reported optimum is the first
optimal play in search order. That play does not depend on which prunings
are enabled nor on the number of worker processes.
"""

from __future__ import annotations

import multiprocessing as mp
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

from .rules import BoardState, Instance, InstanceError, Placement, legal_placements, apply, score

OPTIMAL = "optimal"
BOUND_LIMITED = "bound-limited"


def spiral_order(s: int) -> list[tuple[int, int]]:
    """All cells of an s x s grid spiralling clockwise out from the centre.

    Runs go right 1, down 1, left 2, up 2, right 3, ... and only in-bounds
    cells are emitted.
    """
    r = c = s // 2
    out = [(r, c)]
    dirs = ((0, 1), (1, 0), (0, -1), (-1, 0))
    run, d = 1, 0
    while len(out) < s * s:
        for _ in range(2):
            dr, dc = dirs[d % 4]
            for _ in range(run):
                r, c = r + dr, c + dc
                if 0 <= r < s and 0 <= c < s:
                    out.append((r, c))
            d += 1
        run += 1
    return out


@dataclass
class SearchConfig:
    node_limit: int | None = None
    time_limit: float | None = None
    threads: int = 1
    use_bound: bool = True
    area_monotonicity: bool = True
    first_card_level1: bool = True
    level_order: str = "descending"
    anchor_order: str = "canonical"

    def __post_init__(self):
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node_limit must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.level_order not in ("descending", "ascending"):
            raise ValueError("level_order is 'descending' or 'ascending'")
        if self.anchor_order not in ("canonical", "spiral"):
            raise ValueError("anchor_order is 'canonical' or 'spiral'")


@dataclass
class Stats:
    nodes: int = 0
    dead_ends: int = 0
    pruned: int = 0
    elapsed: float = 0.0

    def add(self, other: "Stats") -> None:
        self.nodes += other.nodes
        self.dead_ends += other.dead_ends
        self.pruned += other.pruned


@dataclass
class OptResult:
    best_score: int | None
    placements: tuple[Placement, ...]
    status: str
    stats: Stats = field(default_factory=Stats)

    @property
    def deck(self) -> tuple[int, ...]:
        return tuple(p.digit for p in self.placements)

    def as_dict(self) -> dict:
        return {
            "score": self.best_score,
            "status": self.status,
            "deck": list(self.deck),
            "placements": [p.as_dict() for p in self.placements],
            "stats": asdict(self.stats),
        }


# -- upper bound -----------------------------------------------------------------

_FALLBACK_ITEMS = 9


@lru_cache(maxsize=None)
def _best_extra(areas: tuple[int, ...], counts: tuple[int, ...], items: tuple[tuple[int, int], ...],
                pick: int, cap: int) -> int:
    """Best extra score from assigning ``pick`` of ``items`` (value, area) to levels.

    Feasible iff every non-empty level above 1 rests on a level with at least
    two parts and at least as much area, and no level exceeds ``cap`` cells.
    Items are sorted by value, descending.
    """
    l_top = len(areas)
    best = -1
    areas_l = list(areas)
    counts_l = list(counts)

    def feasible() -> bool:
        for li in range(l_top):
            if areas_l[li] > cap:
                return False
        for li in range(1, l_top):
            if areas_l[li] and (counts_l[li - 1] < 2 or areas_l[li] > areas_l[li - 1]):
                return False
        return True

    def rec(i: int, left: int, got: int):
        nonlocal best
        if left == 0:
            if got > best and feasible():
                best = got
            return
        if len(items) - i < left:
            return
        # optimistic: the next ``left`` values all on the top level
        if got + sum(v for v, _ in items[i:i + left]) * (l_top - 1) <= best:
            return
        v, a = items[i]
        for li in range(l_top - 1, -1, -1):
            areas_l[li] += a
            counts_l[li] += 1
            rec(i + 1, left - 1, got + v * li)
            areas_l[li] -= a
            counts_l[li] -= 1
        if len(items) - i - 1 >= left:
            rec(i + 1, left, got)

    rec(0, pick, 0)
    return best


def _simple_extra(items: Sequence[tuple[int, int]], pick: int, l_top: int) -> int:
    return sum(v for v, _ in items[:pick]) * (l_top - 1)


def _extra(areas, counts, items, pick, cap, area_monotonicity) -> int:
    """Admissible bound on the score still to be gained; -1 if no completion can exist."""
    if pick == 0:
        return 0
    if not area_monotonicity or len(items) > _FALLBACK_ITEMS:
        return _simple_extra(items, pick, len(areas))
    counts = tuple(min(x, 2) for x in counts)
    return _best_extra(tuple(areas), counts, tuple(items), pick, cap)


def upper_bound(state: BoardState, remaining: Sequence[int], instance: Instance | None = None,
                area_monotonicity: bool = True) -> int:
    """Admissible bound on the best final score reachable from ``state``.

    ``remaining`` holds the digits still to be drawn; for F instances pass
    the multiset of available digits, of which only the cards left are used.
    """
    instance = instance or state.instance
    pick = instance.k - len(state.placements)
    cat = instance.catalog
    items = sorted(((d, len(cat[d])) for d in remaining), reverse=True)
    if len(items) < pick:
        raise ValueError("fewer remaining digits than cards left")
    areas = [state.area(l) for l in range(1, instance.l_top + 1)]
    counts = [len(parts) for parts in state.levels]
    extra = _extra(areas, counts, items, pick, (instance.s - 2) ** 2, area_monotonicity)
    return score(state) + max(extra, 0)


# -- search ------------------------------------------------------------------------

class _Stop(Exception):
    pass


class _Search:
    def __init__(self, instance: Instance, config: SearchConfig, shared=None):
        self.inst = instance
        self.cfg = config
        self.shared = shared
        self.l_top = instance.l_top
        self.k = instance.k
        self.cap = (instance.s - 2) ** 2
        geo = instance.geometry()
        cat = instance.catalog
        self.area = {d: len(cat[d]) for d in range(instance.m + 1)}
        self.anchors = {}
        for d in range(instance.m + 1):
            anchors = list(geo.anchors(d))
            if config.anchor_order == "spiral":
                rank = {cell: i for i, cell in enumerate(spiral_order(instance.s))}
                shapes = cat.orientations(d)

                def centre(a, shapes=shapes):
                    sh = shapes[a.orientation]
                    return rank[(a.row + sh.height // 2, a.col + sh.width // 2)], a.orientation, a.row, a.col

                anchors.sort(key=centre)
            self.anchors[d] = [(a.cells, a.halo, a.orientation, a.row, a.col) for a in anchors]

        self.occ = [0] * self.l_top
        self.parts: list[list[int]] = [[] for _ in range(self.l_top)]
        self.areas = [0] * self.l_top
        self.path: list[tuple[int, int, int]] = []  # (digit, level, anchor index)
        self.score = 0
        if instance.kind == "K":
            self.deck = instance.deck
            self.left = None
        else:
            self.deck = None
            self.left = [instance.c] * (instance.m + 1)

        self.best = -1
        self.best_path: list[tuple[int, int, int]] | None = None
        self.stats = Stats()
        self.limited = False
        self.deadline = None
        self.start = time.monotonic()

    # state changes

    def push(self, d: int, level: int, idx: int) -> None:
        cells = self.anchors[d][idx][0]
        li = level - 1
        self.occ[li] |= cells
        self.parts[li].append(cells)
        self.areas[li] += self.area[d]
        self.path.append((d, level, idx))
        self.score += d * li
        if self.left is not None:
            self.left[d] -= 1

    def pop(self) -> None:
        d, level, idx = self.path.pop()
        cells = self.anchors[d][idx][0]
        li = level - 1
        self.occ[li] ^= cells
        self.parts[li].pop()
        self.areas[li] -= self.area[d]
        self.score -= d * li
        if self.left is not None:
            self.left[d] += 1

    # move generation

    def moves(self, d: int):
        depth = len(self.path)
        top = 0
        for li in range(self.l_top):
            if self.occ[li]:
                top = li + 1
        max_level = min(self.l_top, top + 1)
        if depth == 0 and self.cfg.first_card_level1:
            max_level = 1
        levels = range(max_level, 0, -1) if self.cfg.level_order == "descending" else range(1, max_level + 1)
        anchors = self.anchors[d]
        for level in levels:
            li = level - 1
            occ = self.occ[li]
            if level == 1:
                for idx, (cells, halo, _, _, _) in enumerate(anchors):
                    if cells & occ or (occ and not halo & occ):
                        continue
                    yield level, idx
                continue
            below = self.parts[li - 1]
            if len(below) < 2:
                continue
            outside = ~self.occ[li - 1]
            if self.cfg.area_monotonicity and self.areas[li] + self.area[d] > self.areas[li - 1]:
                continue
            for idx, (cells, halo, _, _, _) in enumerate(anchors):
                if cells & outside or cells & occ or (occ and not halo & occ):
                    continue
                under = 0
                for pm in below:
                    if pm & cells:
                        under += 1
                        if under == 2:
                            break
                if under == 2:
                    yield level, idx

    # bound

    def bound(self) -> int:
        pick = self.k - len(self.path)
        if self.deck is not None:
            rest = self.deck[len(self.path):]
            items = sorted(((d, self.area[d]) for d in rest), reverse=True)
        else:
            items = sorted(((d, self.area[d]) for d, n in enumerate(self.left) for _ in range(n)), reverse=True)
        counts = [len(p) for p in self.parts]
        extra = _extra(self.areas, counts, items, pick, self.cap, self.cfg.area_monotonicity)
        return self.score + extra if extra >= 0 else -1

    def cutoff(self, ub: int) -> bool:
        if ub <= self.best:
            return True
        # strict against other workers keeps the first optimum in search order
        return self.shared is not None and ub < self.shared.value

    # driver

    def tick(self) -> None:
        self.stats.nodes += 1
        if self.cfg.node_limit is not None and self.stats.nodes > self.cfg.node_limit:
            self.limited = True
            raise _Stop
        if self.cfg.time_limit is not None and (self.stats.nodes & 255) == 0:
            if time.monotonic() - self.start > self.cfg.time_limit:
                self.limited = True
                raise _Stop

    def digits(self):
        if self.deck is not None:
            return (self.deck[len(self.path)],)
        return [d for d, n in enumerate(self.left) if n]

    def dfs(self) -> None:
        self.tick()
        if len(self.path) == self.k:
            if self.score > self.best:
                self.best = self.score
                self.best_path = list(self.path)
                if self.shared is not None:
                    with self.shared.get_lock():
                        if self.score > self.shared.value:
                            self.shared.value = self.score
            return
        ub = self.bound() if self.cfg.use_bound else None
        if ub is not None and self.cutoff(ub):
            self.stats.pruned += 1
            return
        moved = False
        for d in self.digits():
            for level, idx in list(self.moves(d)):
                moved = True
                self.push(d, level, idx)
                try:
                    self.dfs()
                finally:
                    self.pop()
                if ub is not None and self.cutoff(ub):
                    return
        if not moved:
            self.stats.dead_ends += 1

    def run(self, prefix: Sequence[tuple[int, int, int]] = ()) -> None:
        for step in prefix:
            self.push(*step)
        try:
            self.dfs()
        except _Stop:
            pass
        self.stats.elapsed = time.monotonic() - self.start

    def first_moves(self) -> list[tuple[int, int, int]]:
        return [(d, level, idx) for d in self.digits() for level, idx in self.moves(d)]

    def to_placements(self, path) -> tuple[Placement, ...]:
        used: Counter = Counter()
        out = []
        for i, (d, level, idx) in enumerate(path, start=1):
            used[d] += 1
            _, _, orient, row, col = self.anchors[d][idx]
            out.append(Placement(i, d, used[d], level, orient, row, col))
        return tuple(out)


_WORKER: dict = {}


def _init_worker(instance, config, shared):
    _WORKER["args"] = (instance, config, shared)


def _run_task(step):
    instance, config, shared = _WORKER["args"]
    search = _Search(instance, config, shared)
    search.run([step])
    return search.best, search.best_path, search.stats, search.limited


def solve(instance: Instance, config: SearchConfig | None = None) -> OptResult:
    """Maximize the score; see the module docstring for the search order."""
    if not isinstance(instance, Instance):
        raise InstanceError("solve needs an Instance")
    config = config or SearchConfig()
    t0 = time.monotonic()
    root = _Search(instance, config)
    if config.threads == 1:
        root.run()
        best, path, stats, limited = root.best, root.best_path, root.stats, root.limited
    else:
        best, path, limited = -1, None, False
        stats = Stats()
        steps = root.first_moves()
        if not steps:
            stats.dead_ends = 1
        ctx = mp.get_context("fork")
        shared = ctx.Value("i", -1)
        with ProcessPoolExecutor(max_workers=config.threads, mp_context=ctx,
                                 initializer=_init_worker, initargs=(instance, config, shared)) as pool:
            for t_best, t_path, t_stats, t_limited in pool.map(_run_task, steps):
                stats.add(t_stats)
                limited = limited or t_limited
                if t_best > best:
                    best, path = t_best, t_path
        stats.nodes += 1
    stats.elapsed = time.monotonic() - t0
    status = BOUND_LIMITED if limited else OPTIMAL
    if path is None:
        return OptResult(None, (), status, stats)
    return OptResult(best, root.to_placements(path), status, stats)


# -- greedy ------------------------------------------------------------------------

@dataclass
class PlayoutResult:
    state: BoardState
    deck: tuple[int, ...]
    dead_end: bool

    @property
    def score(self) -> int:
        return score(self.state)


def sample_deck(instance: Instance, seed: int) -> tuple[int, ...]:
    """A uniformly shuffled deck of k cards drawn from all (m+1)*c parts."""
    parts = [d for d in range(instance.m + 1) for _ in range(instance.c)]
    random.Random(seed).shuffle(parts)
    return tuple(parts[:instance.k])


def greedy_playout(instance: Instance, seed: int | None = None) -> PlayoutResult:
    """Place every card at its highest legal level, ties in canonical order."""
    if instance.kind == "K":
        deck = instance.deck
    else:
        if seed is None:
            raise ValueError("F instances need a seed to sample the deck")
        deck = sample_deck(instance, seed)
    state = BoardState.empty(instance, deck)
    for d in deck:
        moves = legal_placements(state, d)
        if not moves:
            return PlayoutResult(state, deck, True)
        top = max(p.level for p in moves)
        state = apply(state, next(p for p in moves if p.level == top))
    return PlayoutResult(state, deck, False)
