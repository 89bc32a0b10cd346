"""Constraint model generation, serialization and assignment checking.

Variables are scalar and named with 1-based indices, e.g. ``Gp[l,p,i,j]``.
Constraint records are small dicts; ``paper_no`` numbers them 1..12 in the
order of the model, ``kind`` names the constraint family. Record layouts and
their meaning are documented in ``docs/model_format.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from ..rules import BoardState, Instance, score
from .automaton import Dfa, compile
from .regex import build_regex

FORMAT_VERSION = 1

KINDS = (
    "cardinality", "regular", "inverse", "order-channel", "int-bool-channel",
    "iff", "implication", "at-least-two-sum", "linear-objective",
)


class AssignmentError(ValueError):
    """Assignment is missing a declared variable or has a value outside its domain."""


def var(name: str, *idx: int) -> str:
    return f"{name}[{','.join(str(i) for i in idx)}]" if idx else name


@dataclass(frozen=True)
class Variable:
    name: str
    lo: int
    hi: int


@dataclass(frozen=True)
class Violation:
    paper_no: int
    kind: str
    where: dict

    def __str__(self) -> str:
        loc = ", ".join(f"{k}={v}" for k, v in self.where.items())
        return f"constraint ({self.paper_no}) {self.kind} violated at {loc}"


@dataclass
class ModelExport:
    instance: dict
    params: dict  # kind, m, c, k, n, s, l_top, values, deck
    variables: list[Variable]
    constraints: list[dict]
    automata: dict[int, Dfa]
    regexes: dict[int, str]
    search: dict
    _domains: dict = field(default=None, repr=False, compare=False)

    @property
    def scope_length(self) -> int:
        return 1 + self.params["s"] ** 2

    def domains(self) -> dict[str, tuple[int, int]]:
        if self._domains is None:
            self._domains = {v.name: (v.lo, v.hi) for v in self.variables}
        return self._domains

    def count(self, kind: str) -> int:
        return sum(1 for c in self.constraints if c["kind"] == kind)

    def dumps(self) -> str:
        return dumps(self)


def _spiral_cells(s: int) -> list[list[int]]:
    from ..solver import spiral_order

    return [[r + 1, c + 1] for r, c in spiral_order(s)]


def export_model(instance: Instance) -> ModelExport:
    """Build the full variable/constraint listing for an F or K instance."""
    kind, m, c, k, n = instance.kind, instance.m, instance.c, instance.k, instance.n
    s, L = instance.s, instance.l_top
    parts = range(1, n + 1)
    levels = range(1, L + 1)
    cells = [(i, j) for i in range(1, s + 1) for j in range(1, s + 1)]
    values = {p: instance.part_of(p)[0] for p in parts}

    deck_parts = None
    if kind == "K":
        seen: dict[int, int] = {}
        deck_parts = []
        for d in instance.deck:
            seen[d] = seen.get(d, 0) + 1
            deck_parts.append(instance.part_id(d, seen[d]))

    variables: list[Variable] = []
    add = lambda name, lo, hi: variables.append(Variable(name, lo, hi))  # noqa: E731
    for i in range(1, k + 1):
        if deck_parts is not None:
            add(var("D", i), deck_parts[i - 1], deck_parts[i - 1])
        else:
            add(var("D", i), 1, n)
    for p in parts:
        add(var("O", p), 1, n)
    for i in range(k + 1, n + 1):
        add(var("E", i), 1, n)
    for p in parts:
        for q in parts:
            if p != q:
                add(var("B", p, q), 0, 1)
    for l in levels:
        for i, j in cells:
            border = i in (1, s) or j in (1, s)
            add(var("G", l, i, j), 0, 0 if border else n)
    for name, hi in (("Gp", 2), ("G1", 1), ("G2", 1), ("U", 1)):
        for l in levels:
            for p in parts:
                for i, j in cells:
                    add(var(name, l, p, i, j), 0, hi)
    for l in levels:
        for p in parts:
            add(var("X", l, p), 0, 1)
    for p in parts:
        for l in levels:
            add(var("Lb", p, l), 0, 1)
    for p in parts:
        add(var("L", p), 0, L)
        add(var("Y", p), 0, 1)
        add(var("N", p), 0, 1)
    add("S", 0, sum(values.values()) * (L - 1))

    cons: list[dict] = []
    cons.append({
        "paper_no": 1, "kind": "cardinality",
        "vars": [var("D", i) for i in range(1, k + 1)],
        "values": list(parts),
        "counts": [var("Y", p) for p in parts],
    })
    for p in parts:
        for l in levels:
            cons.append({
                "paper_no": 2, "kind": "regular", "part": p, "level": l, "automaton": values[p],
                "scope": [var("Lb", p, l)] + [var("Gp", l, p, i, j) for i, j in cells],
            })
    cons.append({
        "paper_no": 3, "kind": "inverse",
        "x": [var("O", p) for p in parts],
        "y": [var("D", i) for i in range(1, k + 1)] + [var("E", i) for i in range(k + 1, n + 1)],
    })
    for p in parts:
        for q in parts:
            if p != q:
                cons.append({"paper_no": 4, "kind": "order-channel", "form": "before",
                             "b": var("B", p, q), "left": var("O", p), "right": var("O", q)})
    for p in parts:
        cons.append({"paper_no": 4, "kind": "order-channel", "form": "drawn",
                     "y": var("Y", p), "o": var("O", p), "k": k})
    for p in parts:
        cons.append({"paper_no": 5, "kind": "int-bool-channel", "int": var("L", p),
                     "bools": [var("N", p)] + [var("Lb", p, l) for l in levels]})
    for p in parts:
        cons.append({"paper_no": 6, "kind": "iff", "lhs": [var("Y", p), 1], "rhs": [var("N", p), 0]})
    for l in levels:
        for p in parts:
            for value, aspect in ((1, "G1"), (2, "G2")):
                cons.append({"paper_no": 7, "kind": "iff", "cells": True,
                             "lhs": [["Gp", l, p], value], "rhs": [[aspect, l, p], 1]})
    for l in levels:
        for p in parts:
            cons.append({"paper_no": 8, "kind": "iff", "cells": True,
                         "lhs": [["G", l], p], "rhs": [["Gp", l, p], 1]})
    for l in levels:
        for p in parts:
            cons.append({"paper_no": 9, "kind": "iff", "define": "X", "level": l, "part": p})
            cons.append({"paper_no": 9, "kind": "iff", "define": "U", "level": l, "part": p, "cells": True})
            cons.append({"paper_no": 9, "kind": "implication", "level": l, "part": p})
    for l in levels[1:]:
        for p in parts:
            cons.append({"paper_no": 10, "kind": "implication", "level": l, "part": p, "cells": True})
    for l in levels[1:]:
        for p in parts:
            cons.append({"paper_no": 11, "kind": "at-least-two-sum", "level": l, "part": p, "bound": 2})
    cons.append({
        "paper_no": 12, "kind": "linear-objective", "sense": "maximize", "objective": "S",
        "terms": [[values[p], var("L", p), var("Y", p)] for p in parts],
    })

    automata: dict[int, Dfa] = {}
    regexes: dict[int, str] = {}
    for d in range(m + 1):
        regex = build_regex(instance.catalog.orientations(d), s, d)
        automata[d] = compile(regex)
        regexes[d] = regex.text(symbolic=False)

    search = {
        "decision_order": ["D", "L", "Gp"],
        "cell_order": _spiral_cells(s),
        "objective": "maximize S",
    }
    params = {
        "kind": kind, "m": m, "c": c, "k": k, "n": n, "s": s, "l_top": L,
        "values": [values[p] for p in parts],
        "deck": list(instance.deck) if instance.deck is not None else None,
    }
    return ModelExport(instance.echo(), params, variables, cons, automata, regexes, search)


# -- scopes ------------------------------------------------------------------

def _cells(export: ModelExport):
    s = export.params["s"]
    return [(i, j) for i in range(1, s + 1) for j in range(1, s + 1)]


def _others(export: ModelExport, p: int):
    return [q for q in range(1, export.params["n"] + 1) if q != p]


def scope(export: ModelExport, con: dict) -> list[str]:
    """Names of every variable a constraint record refers to."""
    no, kind = con["paper_no"], con["kind"]
    if kind == "cardinality":
        return con["vars"] + con["counts"]
    if kind == "regular":
        return list(con["scope"])
    if kind == "inverse":
        return con["x"] + con["y"]
    if kind == "order-channel":
        if con["form"] == "before":
            return [con["b"], con["left"], con["right"]]
        return [con["y"], con["o"]]
    if kind == "int-bool-channel":
        return [con["int"]] + con["bools"]
    if kind == "linear-objective":
        return [con["objective"]] + [n for _, a, b in con["terms"] for n in (a, b)]
    if no in (6, 7, 8):
        if con.get("cells"):
            return [var(ref[0], *ref[1:], i, j) for ref in (con["lhs"][0], con["rhs"][0]) for i, j in _cells(export)]
        return [con["lhs"][0], con["rhs"][0]]
    l, p = con["level"], con["part"]
    others = _others(export, p)
    if no == 9 and con.get("define") == "X":
        return [var("X", l, p)] + [n for q in others for n in (var("B", q, p), var("Lb", q, l))]
    if no == 9 and con.get("define") == "U":
        return [n for i, j in _cells(export) for n in
                [var("U", l, p, i, j)] + [m for q in others for m in (var("B", q, p), var("G1", l, q, i, j))]]
    if no == 9:
        return [var("Lb", p, l), var("X", l, p)] + [
            n for i, j in _cells(export) for n in (var("G2", l, p, i, j), var("U", l, p, i, j))]
    if no == 10:
        return [n for i, j in _cells(export) for n in (var("G1", l, p, i, j), var("U", l - 1, p, i, j))]
    if no == 11:
        mine = [var("G1", l, p, i, j) for i, j in _cells(export)]
        below = [var("G1", l - 1, q, i, j) for q in others for i, j in _cells(export)]
        return [var("Lb", p, l)] + [var("B", q, p) for q in others] + mine + below
    raise ValueError(f"unknown constraint record {con}")


# -- checking ----------------------------------------------------------------

def _check(export: ModelExport, con: dict, a: Mapping[str, int]) -> dict | None:
    """Return None if the record holds, else a dict locating the failure."""
    no, kind = con["paper_no"], con["kind"]
    if kind == "cardinality":
        vals = [a[v] for v in con["vars"]]
        for value, cnt in zip(con["values"], con["counts"]):
            if vals.count(value) != a[cnt]:
                return {"value": value}
        return None
    if kind == "regular":
        dfa = export.automata[con["automaton"]]
        if not dfa.accepts(a[v] for v in con["scope"]):
            return {"part": con["part"], "level": con["level"]}
        return None
    if kind == "inverse":
        x = [a[v] for v in con["x"]]
        y = [a[v] for v in con["y"]]
        for p, pos in enumerate(x, start=1):
            if not 1 <= pos <= len(y) or y[pos - 1] != p:
                return {"part": p}
        for i, p in enumerate(y, start=1):
            if not 1 <= p <= len(x) or x[p - 1] != i:
                return {"position": i}
        return None
    if kind == "order-channel":
        if con["form"] == "before":
            if a[con["b"]] != int(a[con["left"]] < a[con["right"]]):
                return {"var": con["b"]}
        elif a[con["y"]] != int(a[con["o"]] <= con["k"]):
            return {"var": con["y"]}
        return None
    if kind == "int-bool-channel":
        v = a[con["int"]]
        for idx, b in enumerate(con["bools"]):
            if a[b] != int(v == idx):
                return {"var": b}
        return None
    if kind == "linear-objective":
        total = sum(coef * (a[lv] - a[yv]) for coef, lv, yv in con["terms"])
        if a[con["objective"]] != total:
            return {"objective": con["objective"], "expected": total}
        return None
    if no in (6, 7, 8):
        (lref, lval), (rref, rval) = con["lhs"], con["rhs"]
        if con.get("cells"):
            for i, j in _cells(export):
                ln, rn = var(lref[0], *lref[1:], i, j), var(rref[0], *rref[1:], i, j)
                if (a[ln] == lval) != (a[rn] == rval):
                    return {"var": ln, "cell": [i, j]}
            return None
        if (a[lref] == lval) != (a[rref] == rval):
            return {"var": lref}
        return None

    l, p = con["level"], con["part"]
    others = _others(export, p)
    if no == 9 and con.get("define") == "X":
        want = int(any(a[var("B", q, p)] and a[var("Lb", q, l)] for q in others))
        if a[var("X", l, p)] != want:
            return {"var": var("X", l, p)}
        return None
    if no == 9 and con.get("define") == "U":
        earlier = [q for q in others if a[var("B", q, p)]]
        for i, j in _cells(export):
            want = int(any(a[var("G1", l, q, i, j)] for q in earlier))
            if a[var("U", l, p, i, j)] != want:
                return {"var": var("U", l, p, i, j), "cell": [i, j]}
        return None
    if no == 9:
        if a[var("Lb", p, l)] and a[var("X", l, p)]:
            if not any(a[var("G2", l, p, i, j)] and a[var("U", l, p, i, j)] for i, j in _cells(export)):
                return {"level": l, "part": p}
        return None
    if no == 10:
        for i, j in _cells(export):
            if a[var("G1", l, p, i, j)] and not a[var("U", l - 1, p, i, j)]:
                return {"level": l, "part": p, "cell": [i, j]}
        return None
    if no == 11:
        if a[var("Lb", p, l)]:
            mine = [(i, j) for i, j in _cells(export) if a[var("G1", l, p, i, j)]]
            under = sum(
                1 for q in others
                if a[var("B", q, p)] and any(a[var("G1", l - 1, q, i, j)] for i, j in mine)
            )
            if under < con["bound"]:
                return {"level": l, "part": p, "supporting_parts": under}
        return None
    raise ValueError(f"unknown constraint record {con}")


def _check_domains(export: ModelExport, assignment: Mapping[str, int]) -> None:
    for name, (lo, hi) in export.domains().items():
        if name not in assignment:
            raise AssignmentError(f"no value for variable {name}")
        v = assignment[name]
        if not lo <= v <= hi:
            raise AssignmentError(f"{name}={v} outside domain {lo}..{hi}")


def violations(export: ModelExport, assignment: Mapping[str, int]) -> Iterator[Violation]:
    """Every violated constraint record, in model order."""
    _check_domains(export, assignment)
    for con in export.constraints:
        where = _check(export, con, assignment)
        if where is not None:
            yield Violation(con["paper_no"], con["kind"], where)


def verify_assignment(export: ModelExport, assignment: Mapping[str, int]) -> Violation | None:
    """Check every exported constraint; return the first violation in model order, or None.

    Raises AssignmentError when a declared variable is missing or out of domain.
    """
    return next(violations(export, assignment), None)


def assignment_from_state(export: ModelExport, state: BoardState) -> dict[str, int]:
    """Transcribe an engine state (normally terminal) into model variable values."""
    inst = state.instance
    P = export.params
    n, k, s, L = P["n"], P["k"], P["s"], P["l_top"]
    geo = inst.geometry()
    a: dict[str, int] = {name: 0 for name in export.domains()}

    drawn = []
    info = {}
    for pl in state.placements:
        pid = inst.part_id(pl.digit, pl.copy)
        drawn.append(pid)
        info[pid] = pl
    unused = [p for p in range(1, n + 1) if p not in info]
    order = drawn + unused
    pos = {p: i for i, p in enumerate(order, start=1)}
    for i in range(1, k + 1):
        a[var("D", i)] = order[i - 1] if i <= len(order) else 0
    for i in range(k + 1, n + 1):
        a[var("E", i)] = order[i - 1]
    for p in range(1, n + 1):
        a[var("O", p)] = pos[p]
        for q in range(1, n + 1):
            if p != q:
                a[var("B", p, q)] = int(pos[p] < pos[q])
        placed = p in info
        lvl = info[p].level if placed else 0
        a[var("L", p)] = lvl
        a[var("Y", p)] = int(placed)
        a[var("N", p)] = int(not placed)
        for l in range(1, L + 1):
            a[var("Lb", p, l)] = int(lvl == l)
        if placed:
            pl = info[p]
            anchor = geo.anchor(pl.digit, pl.orientation, pl.row, pl.col)
            for r, c in geo.cells_of(anchor.halo):
                a[var("Gp", lvl, p, r + 1, c + 1)] = 2
                a[var("G2", lvl, p, r + 1, c + 1)] = 1
            for r, c in geo.cells_of(anchor.cells):
                a[var("Gp", lvl, p, r + 1, c + 1)] = 1
                a[var("G1", lvl, p, r + 1, c + 1)] = 1
                a[var("G", lvl, r + 1, c + 1)] = p
    derive_auxiliary(export, a)
    a["S"] = score(state)
    return a


def derive_auxiliary(export: ModelExport, a: dict[str, int]) -> None:
    """Fill the X and U helper variables from B, Lb and G1 values."""
    n, s, L = export.params["n"], export.params["s"], export.params["l_top"]
    for l in range(1, L + 1):
        for p in range(1, n + 1):
            earlier = [q for q in range(1, n + 1) if q != p and a[var("B", q, p)]]
            a[var("X", l, p)] = int(any(a[var("Lb", q, l)] for q in earlier))
            for i in range(1, s + 1):
                for j in range(1, s + 1):
                    a[var("U", l, p, i, j)] = int(any(a[var("G1", l, q, i, j)] for q in earlier))


# -- serialization -------------------------------------------------------------

def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def dumps(export: ModelExport) -> str:
    out = [
        "nmbr9-model",
        f"format_version {FORMAT_VERSION}",
        f"scope_length {export.scope_length}",
        "[instance]",
        _json(export.instance),
        _json(export.params),
        "[variables]",
    ]
    out.extend(f"{v.name} {v.lo} {v.hi}" for v in export.variables)
    out.append("[constraints]")
    out.extend(_json(c) for c in export.constraints)
    out.append("[automata]")
    for d in sorted(export.automata):
        dfa = export.automata[d]
        out.append(f"automaton {d} states {dfa.n_states} start {dfa.start} "
                   f"accepting {' '.join(str(q) for q in sorted(dfa.accepting))}")
        out.append(f"regex {export.regexes[d]}")
        out.extend(f"{q} {a} {t}" for q, a, t in dfa.triples())
        out.append("end")
    out.append("[search]")
    out.append(_json(export.search))
    return "\n".join(out) + "\n"


def loads(text: str) -> ModelExport:
    """Parse a model file written by :func:`dumps`."""
    lines = iter(text.splitlines())
    if next(lines) != "nmbr9-model":
        raise ValueError("not an nmbr9 model file")
    version = int(next(lines).split()[1])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {version}")
    next(lines)  # scope_length is derived from s
    section = None
    instance = params = search = None
    variables, constraints = [], []
    automata, regexes = {}, {}
    for line in lines:
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if section == "instance":
            if instance is None:
                instance = json.loads(line)
            else:
                params = json.loads(line)
        elif section == "variables":
            name, lo, hi = line.split()
            variables.append(Variable(name, int(lo), int(hi)))
        elif section == "constraints":
            constraints.append(json.loads(line))
        elif section == "automata":
            head = line.split()
            digit, n_states, start = int(head[1]), int(head[3]), int(head[5])
            accepting = frozenset(int(x) for x in head[7:])
            regexes[digit] = next(lines)[len("regex "):]
            delta = [[-1, -1, -1] for _ in range(n_states)]
            for row in lines:
                if row == "end":
                    break
                q, sym, t = (int(x) for x in row.split())
                delta[q][sym] = t
            automata[digit] = Dfa(n_states, start, accepting, tuple(tuple(r) for r in delta))
        elif section == "search":
            search = json.loads(line)
    return ModelExport(instance, params, variables, constraints, automata, regexes, search)


def write_model(export: ModelExport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(export))


def referenced_variables(export: ModelExport) -> set[str]:
    names: set[str] = set()
    for con in export.constraints:
        names.update(scope(export, con))
    return names
