"""Regex to DFA: Thompson construction, subset construction, minimization.

DFAs are stored trimmed: every state is reachable and can reach acceptance,
and a missing transition (``-1``) rejects.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .regex import ALPHABET, Alt, Cat, Node, PlacementRegex, Rep, Sym

SYM_INDEX = {ch: i for i, ch in enumerate(ALPHABET)}


@dataclass(frozen=True)
class Dfa:
    n_states: int
    start: int
    accepting: frozenset[int]
    delta: tuple[tuple[int, ...], ...]  # delta[state][symbol] -> state or -1

    def step(self, state: int, symbol) -> int:
        if state < 0:
            return -1
        return self.delta[state][SYM_INDEX[str(symbol)]]

    def accepts(self, word: Iterable) -> bool:
        q = self.start
        for ch in word:
            q = self.step(q, ch)
            if q < 0:
                return False
        return q in self.accepting

    def triples(self) -> list[tuple[int, int, int]]:
        """Transitions as (state, symbol, target), symbols numbered as the grid values 0, 1, 2."""
        return [
            (q, int(ALPHABET[a]), t)
            for q, row in enumerate(self.delta)
            for a, t in enumerate(row)
            if t >= 0
        ]

    def completed(self) -> "Dfa":
        """Equivalent DFA with an explicit rejecting sink, total on {0, 1, 2}."""
        sink = self.n_states
        delta = tuple(tuple(sink if t < 0 else t for t in row) for row in self.delta)
        delta += ((sink,) * len(ALPHABET),)
        return Dfa(self.n_states + 1, self.start, self.accepting, delta)

    def is_complete(self) -> bool:
        return all(t >= 0 for row in self.delta for t in row)


class _Nfa:
    def __init__(self):
        self.edges: list[list[tuple[int, int]]] = []  # (symbol index, target)
        self.eps: list[list[int]] = []

    def state(self) -> int:
        self.edges.append([])
        self.eps.append([])
        return len(self.edges) - 1

    def build(self, node: Node) -> tuple[int, int]:
        if isinstance(node, Sym):
            a, b = self.state(), self.state()
            self.edges[a].append((SYM_INDEX[node.ch], b))
            return a, b
        if isinstance(node, Cat):
            start = end = self.state()
            for item in node.items:
                s, e = self.build(item)
                self.eps[end].append(s)
                end = e
            return start, end
        if isinstance(node, Alt):
            start, end = self.state(), self.state()
            for item in node.items:
                s, e = self.build(item)
                self.eps[start].append(s)
                self.eps[e].append(end)
            return start, end
        if isinstance(node, Rep):
            start = end = self.state()
            for _ in range(node.lo):
                s, e = self.build(node.node)
                self.eps[end].append(s)
                end = e
            if node.hi is None:
                s, e = self.build(node.node)
                loop_in = self.state()
                self.eps[end].append(loop_in)
                self.eps[loop_in].append(s)
                self.eps[e].append(loop_in)
                end = loop_in
            else:
                tail = self.state()
                for _ in range(node.hi - node.lo):
                    s, e = self.build(node.node)
                    self.eps[end].append(s)
                    self.eps[end].append(tail)
                    end = e
                self.eps[end].append(tail)
                end = tail
            return start, end
        raise TypeError(f"not a regex node: {node!r}")

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        seen = set(states)
        stack = list(seen)
        while stack:
            q = stack.pop()
            for t in self.eps[q]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)


def subset_construction(node: Node) -> Dfa:
    nfa = _Nfa()
    start, final = nfa.build(node)
    first = nfa.closure([start])
    ids = {first: 0}
    order = [first]
    delta: list[list[int]] = []
    i = 0
    while i < len(order):
        current = order[i]
        row = []
        for a in range(len(ALPHABET)):
            moved = [t for q in current for sym, t in nfa.edges[q] if sym == a]
            if not moved:
                row.append(-1)
                continue
            target = nfa.closure(moved)
            if target not in ids:
                ids[target] = len(order)
                order.append(target)
            row.append(ids[target])
        delta.append(row)
        i += 1
    accepting = frozenset(i for i, st in enumerate(order) if final in st)
    return Dfa(len(order), 0, accepting, tuple(tuple(r) for r in delta))


def restrict_border(dfa: Dfa, s: int) -> Dfa:
    """Product with a column counter forbidding ``1`` in grid columns 0 and s-1.

    The first symbol read is the control symbol; grid symbols follow row-major.
    """
    # phase -1: before the control symbol; otherwise column of the next grid symbol
    start = (dfa.start, -1)
    ids = {start: 0}
    order = [start]
    delta = []
    i = 0
    one = SYM_INDEX["1"]
    while i < len(order):
        q, phase = order[i]
        row = []
        for a in range(len(ALPHABET)):
            t = dfa.delta[q][a]
            if t < 0 or (phase >= 0 and a == one and phase in (0, s - 1)):
                row.append(-1)
                continue
            nxt = (t, 0 if phase < 0 else (phase + 1) % s)
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
            row.append(ids[nxt])
        delta.append(row)
        i += 1
    accepting = frozenset(i for i, (q, _) in enumerate(order) if q in dfa.accepting)
    return Dfa(len(order), 0, accepting, tuple(tuple(r) for r in delta))


def restrict_grid(dfa: Dfa, s: int) -> Dfa:
    """Product with a position counter: the border rule plus an exact word length of 1+s^2."""
    total = s * s
    start = (dfa.start, -1)
    ids = {start: 0}
    order = [start]
    delta = []
    i = 0
    one = SYM_INDEX["1"]
    while i < len(order):
        q, pos = order[i]
        row = []
        for a in range(len(ALPHABET)):
            t = dfa.delta[q][a]
            if t < 0 or pos >= total or (pos >= 0 and a == one and pos % s in (0, s - 1)):
                row.append(-1)
                continue
            nxt = (t, pos + 1)
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
            row.append(ids[nxt])
        delta.append(row)
        i += 1
    accepting = frozenset(i for i, (q, pos) in enumerate(order) if pos == total and q in dfa.accepting)
    return Dfa(len(order), 0, accepting, tuple(tuple(r) for r in delta))


def trim(dfa: Dfa) -> Dfa:
    """Drop states that are unreachable or cannot reach an accepting state."""
    reverse: list[list[int]] = [[] for _ in range(dfa.n_states)]
    for q, row in enumerate(dfa.delta):
        for t in row:
            if t >= 0:
                reverse[t].append(q)
    live = set(dfa.accepting)
    stack = list(live)
    while stack:
        q = stack.pop()
        for p in reverse[q]:
            if p not in live:
                live.add(p)
                stack.append(p)
    if dfa.start not in live:
        return Dfa(1, 0, frozenset(), ((-1,) * len(ALPHABET),))
    return _renumber(dfa, lambda q: q if q in live else -1)


def _renumber(dfa: Dfa, cls) -> Dfa:
    # BFS from start in symbol order gives a canonical numbering
    ids = {cls(dfa.start): 0}
    rep = {cls(dfa.start): dfa.start}
    queue = deque([dfa.start])
    rows: dict[int, list[int]] = {}
    while queue:
        q = queue.popleft()
        row = []
        for t in dfa.delta[q]:
            ct = cls(t) if t >= 0 else -1
            if ct == -1:
                row.append(-1)
                continue
            if ct not in ids:
                ids[ct] = len(ids)
                rep[ct] = t
                queue.append(t)
            row.append(ids[ct])
        rows[ids[cls(q)]] = row
    accepting = frozenset(ids[c] for c in ids if rep[c] in dfa.accepting)
    delta = tuple(tuple(rows[i]) for i in range(len(ids)))
    return Dfa(len(ids), 0, accepting, delta)


def _postorder(dfa: Dfa) -> list[int] | None:
    """States with successors first, or None when the automaton has a cycle."""
    state = [0] * dfa.n_states  # 0 new, 1 on stack, 2 done
    order = []
    stack = [(dfa.start, 0)]
    state[dfa.start] = 1
    while stack:
        q, i = stack.pop()
        if i == len(ALPHABET):
            state[q] = 2
            order.append(q)
            continue
        stack.append((q, i + 1))
        t = dfa.delta[q][i]
        if t < 0:
            continue
        if state[t] == 1:
            return None
        if state[t] == 0:
            state[t] = 1
            stack.append((t, 0))
    return order


def minimize(dfa: Dfa) -> Dfa:
    """Minimal trimmed DFA.

    Acyclic automata are merged bottom-up by signature in one pass; others
    go through partition refinement.
    """
    dfa = trim(dfa)
    order = _postorder(dfa)
    if order is not None:
        cls = [-1] * dfa.n_states
        sigs: dict = {}
        for q in order:
            sig = (q in dfa.accepting, tuple(cls[t] if t >= 0 else -1 for t in dfa.delta[q]))
            cls[q] = sigs.setdefault(sig, len(sigs))
        return _renumber(dfa, lambda q: cls[q])
    cls = [1 if q in dfa.accepting else 0 for q in range(dfa.n_states)]
    count = len(set(cls))
    while True:
        sigs = {}
        new = []
        for q in range(dfa.n_states):
            sig = (cls[q], tuple(cls[t] if t >= 0 else -1 for t in dfa.delta[q]))
            new.append(sigs.setdefault(sig, len(sigs)))
        cls = new
        if len(sigs) == count:
            break
        count = len(sigs)
    return _renumber(dfa, lambda q: cls[q])


def compile(regex, border: int | None = None, exact_length: bool = False) -> Dfa:
    """Compile a regex node or PlacementRegex to a minimal DFA.

    Placement expressions are restricted to their grid border automatically;
    pass ``border`` to do the same for a bare node. The result still accepts
    padded words of other lengths, since a regular constraint fixes the length
    by its scope. ``exact_length`` also pins the length to 1+s^2, at the cost
    of an automaton roughly s^2 times larger.
    """
    if isinstance(regex, PlacementRegex):
        node, border = regex.node, regex.s
    else:
        node = regex
    dfa = minimize(subset_construction(node))
    if border is not None:
        restrict = restrict_grid if exact_length else restrict_border
        dfa = minimize(restrict(dfa, border))
    elif exact_length:
        raise ValueError("exact_length needs a grid size")
    return dfa


def count_accepted(dfa: Dfa, length: int) -> int:
    """Number of accepted words of exactly ``length`` symbols."""
    counts = [0] * dfa.n_states
    counts[dfa.start] = 1
    for _ in range(length):
        nxt = [0] * dfa.n_states
        for q, n in enumerate(counts):
            if n:
                for t in dfa.delta[q]:
                    if t >= 0:
                        nxt[t] += n
        counts = nxt
    return sum(counts[q] for q in dfa.accepting)


def words(dfa: Dfa, length: int) -> list[str]:
    """All accepted words of a given length, in lexicographic order (small automata only)."""
    # states that can still accept in exactly r more steps
    can = [set(dfa.accepting)]
    for _ in range(length):
        prev = can[-1]
        can.append({q for q in range(dfa.n_states) if any(t in prev for t in dfa.delta[q] if t >= 0)})
    out: list[str] = []

    def rec(q: int, left: int, prefix: list[str]):
        if left == 0:
            out.append("".join(prefix))
            return
        for a, t in enumerate(dfa.delta[q]):
            if t >= 0 and t in can[left - 1]:
                prefix.append(ALPHABET[a])
                rec(t, left - 1, prefix)
                prefix.pop()

    if dfa.start in can[length]:
        rec(dfa.start, length, [])
    return out


def word_for(cells: Sequence[tuple[int, int]], halo: Sequence[tuple[int, int]], s: int, placed: bool = True) -> str:
    """Placement word for absolute grid cells and halo cells."""
    grid = ["0"] * (s * s)
    if placed:
        for r, c in halo:
            grid[r * s + c] = "2"
        for r, c in cells:
            grid[r * s + c] = "1"
    return ("1" if placed else "0") + "".join(grid)
