"""Acceptance suite: one test per criterion, each recorded for the end-of-run summary."""

import itertools
import time
from pathlib import Path

import pytest

from nmbr9.model.automaton import compile, count_accepted, words
from nmbr9.model.export import assignment_from_state, export_model, var, verify_assignment, violations
from nmbr9.model.regex import build_regex
from nmbr9.oracle import best_score_bruteforce, check_state, enumerate_terminals
from nmbr9.rules import (
    BoardState, Instance, Placement, _commit, apply, legal_placements, replay, score,
)
from nmbr9.shapes import RING, default_catalog, distinct_orientations
from nmbr9.solver import OPTIMAL, SearchConfig, greedy_playout, solve

GOLDEN = Path(__file__).parent / "golden" / "r0.txt"


# 1 -----------------------------------------------------------------------------------

# a legal tower: two rings, two 1s and a 6 on level 1; a 2 and a 6 on level 2; an 8 on top
TOWER_DECK = [0, 0, 1, 1, 6, 2, 6, 8]
TOWER = [(1, 0, 1, 2), (1, 0, 1, 5), (1, 3, 5, 3), (1, 1, 5, 5), (1, 1, 7, 5), (2, 1, 4, 4), (2, 0, 6, 5),
         (3, 0, 5, 5)]


def build_tower():
    inst = Instance.from_variant("K-9-2-8", deck=TOWER_DECK, s=14, l_top=3)
    state = BoardState.empty(inst)
    copies = {}
    for i, (d, (level, o, r, c)) in enumerate(zip(TOWER_DECK, TOWER), start=1):
        copies[d] = copies.get(d, 0) + 1
        state = apply(state, Placement(i, d, copies[d], level, o, r, c))
    return state


def test_criterion_1_scoring(record_criterion):
    state = build_tower()
    check_state(state)
    eight = state.placements[-1]
    per_part = {(p.digit, p.copy): p.digit * (p.level - 1) for p in state.placements}
    level_one = [per_part[(p.digit, p.copy)] for p in state.placements if p.level == 1]
    flat = replay(state.instance, state.placements[:5])
    ok = (eight.digit == 8 and eight.level == 3 and per_part[(8, 1)] == 16
          and level_one == [0] * 5 and score(flat) == 0
          and score(state) == 16 + 2 + 6 == sum(per_part.values()))
    record_criterion(1, "scoring: 8 on level 3 scores 16, level-1 parts score 0", ok,
                     f"tower score {score(state)}, 8-part contributes {per_part[(8, 1)]}")


# 2 -----------------------------------------------------------------------------------

def test_criterion_2_r0(record_criterion):
    t0 = time.monotonic()
    regex = build_regex(distinct_orientations(RING), 20, digit=0)
    text = regex.text()
    golden = GOLDEN.read_text().strip()
    alternatives = regex.node.items[0].items[2].items  # 1 0* (A | B) 0*
    dfa = compile(build_regex(distinct_orientations(RING), 8))
    placed = [w for w in words(dfa, 65) if w[0] == "1"]
    ring_at_11 = [w for w in placed if w[1 + 8 + 1] == "1" and w[1 + 8 + 3] == "1" and w[1 + 2 * 8 + 1] == "1"
                  and w[1 + 4 * 8 + 1] == "1"]
    holes_zero = bool(ring_at_11) and all(w[1 + 2 * 8 + 2] == "0" and w[1 + 3 * 8 + 2] == "0" for w in ring_at_11)
    ok = (text == golden and len(alternatives) == 2 and text.endswith("|00^*")
          and all(w.count("2") == 14 for w in placed) and holes_zero
          and time.monotonic() - t0 < 1.0)
    record_criterion(2, "R0 reproduced token-for-token", ok, text)


# 3 -----------------------------------------------------------------------------------

def test_criterion_3_counting(record_criterion):
    t0 = time.monotonic()
    cat = default_catalog()
    mismatches = []
    strict_errors = 0
    for s in (6, 8, 10):
        for d in range(10):
            fits = max(cat[d].height, cat[d].width) + 2 <= s
            if not fits:
                with pytest.raises(ValueError):
                    build_regex(cat.orientations(d), s, digit=d)
                strict_errors += 1
            regex = build_regex(cat.orientations(d), s, digit=d, strict=False)
            # anchors keeping a 1-cell margin, counted from the shape extents alone
            direct = sum(max(0, s - 1 - o.height) * max(0, s - 1 - o.width) for o in cat.orientations(d))
            if fits and max(max(cat[e].height, cat[e].width) for e in range(d + 1)) + 2 <= s:
                engine = len(legal_placements(BoardState.empty(_solo(d, s)), d))
                if engine != direct:
                    mismatches.append(("engine", d, s, engine, direct))
            got = count_accepted(compile(regex), 1 + s * s)
            if got != 1 + direct:
                mismatches.append((d, s, got, 1 + direct))
    r0_s8 = count_accepted(compile(build_regex(cat.orientations(0), 8)), 65)
    elapsed = time.monotonic() - t0
    ok = not mismatches and r0_s8 == 25 and strict_errors == 1 and elapsed < 10
    record_criterion(3, "automaton counts equal 1 + direct enumeration", ok,
                     f"digit 0 at s=8 -> {r0_s8}; {elapsed:.1f}s; mismatches {mismatches}")


def _solo(d, s):
    return Instance.from_variant(f"K-{d}-1-1", deck=[d], s=s, l_top=2)


# 4 -----------------------------------------------------------------------------------

def test_criterion_4_export_size(record_criterion):
    t0 = time.monotonic()
    small = export_model(Instance.from_variant("K-1-1-2", deck=[0, 1], s=6, l_top=2))
    big = export_model(Instance.from_variant("F-9-2-20", s=20, l_top=7))
    text = big.dumps()
    elapsed = time.monotonic() - t0
    ok = (small.count("regular") == 4 and big.count("regular") == 140
          and text.count('"kind":"regular"') == 140 and elapsed < 30)
    record_criterion(4, "l_top * n regular constraints", ok,
                     f"K-1-1-2 -> {small.count('regular')}, F-9-2-20 -> {big.count('regular')}; {elapsed:.1f}s")


# 5 -----------------------------------------------------------------------------------

def small_suite():
    for l_top in (2, 3):
        for k in (1, 2, 3):
            for deck in itertools.product(range(4), repeat=k):
                yield Instance.from_variant(f"K-3-3-{k}", deck=list(deck), s=8, l_top=l_top)
        for m in range(4):
            for k in range(1, min(3, m + 1) + 1):
                yield Instance.from_variant(f"F-{m}-1-{k}", s=8, l_top=l_top)


def test_criterion_5_solver_matches_oracle(record_criterion):
    t0 = time.monotonic()
    disagreements = []
    count = positive = 0
    for inst in small_suite():
        count += 1
        best = best_score_bruteforce(inst).max_score
        r = solve(inst)
        positive += bool(best)
        if r.best_score != best or r.status != OPTIMAL:
            disagreements.append((inst.variant, inst.deck, inst.l_top, r.best_score, best))
    ok = not disagreements and count == 2 * (4 + 16 + 64 + 9)
    record_criterion(5, "solver equals brute force on the small suite", ok,
                     f"{count} instances, {positive} with non-zero optimum, {time.monotonic() - t0:.1f}s; "
                     f"disagreements {disagreements[:5]}")


# 6 -----------------------------------------------------------------------------------

def test_criterion_6_forced_zero(record_criterion):
    instances = [i for i in small_suite() if i.k <= 2]
    instances += [Instance.from_variant("K-9-2-2", deck=list(d), s=10, l_top=4)
                  for d in ((9, 9), (8, 9), (0, 8), (5, 2), (7, 7))]
    instances += [Instance.from_variant("F-9-2-2", s=10, l_top=3), Instance.from_variant("F-9-1-1", s=10, l_top=3)]
    bad = []
    for inst in instances:
        r = solve(inst)
        if r.best_score != 0 or r.status != OPTIMAL:
            bad.append((inst.variant, inst.deck, r.best_score, r.status))
    record_criterion(6, "k <= 2 forces an optimum of 0", not bad, f"{len(instances)} instances; failures {bad}")


# 7 -----------------------------------------------------------------------------------

def test_criterion_7_benchmark(record_criterion):
    inst = Instance.from_variant("F-6-1-5", s=8, l_top=3)
    runs = []
    for use_bound, area, first in itertools.product([True, False], repeat=3):
        cfg = SearchConfig(use_bound=use_bound, area_monotonicity=area, first_card_level1=first,
                           time_limit=30 * 60)
        runs.append(((use_bound, area, first), solve(inst, cfg)))
    scores = {r.best_score for _, r in runs}
    sequences = {r.placements for _, r in runs}
    state = replay(inst, runs[0][1].placements, runs[0][1].deck)
    ok = (len(scores) == 1 and len(sequences) == 1 and all(r.status == OPTIMAL for _, r in runs)
          and score(state) == runs[0][1].best_score)
    timing = ", ".join(f"{'B' if b else 'b'}{'A' if a else 'a'}{'F' if f else 'f'}={r.stats.elapsed:.1f}s"
                       for (b, a, f), r in runs)
    record_criterion(7, "F-6-1-5 optimum proven and identical under every toggle set", ok,
                     f"optimum {scores}, {timing}")


# 8 -----------------------------------------------------------------------------------

ROUND_TRIP = [
    ("K-3-1-3", [1, 2, 3], 7, 2),
    ("K-3-1-3", [3, 1, 2], 7, 3),
    ("F-2-1-3", None, 7, 2),
    ("K-1-3-3", [1, 1, 1], 7, 2),
    ("F-1-1-2", None, 7, 2),
]


def collect_terminals(total=50, per_instance=12):
    out = []
    for variant, deck, s, l_top in ROUND_TRIP:
        inst = Instance.from_variant(variant, deck=deck, s=s, l_top=l_top)
        found = []
        # keep the scoring terminals first so level-2 parts are exercised
        enumerate_terminals(inst, found.append)
        found.sort(key=lambda st: -score(st))
        out.extend(found[:per_instance])
    return out[:total]


def corruption_cases():
    """(constraint number, export, corrupted assignment) for every constraint class."""
    inst = Instance.from_variant("F-3-1-3", s=7, l_top=2)
    ex = export_model(inst)
    found = []
    enumerate_terminals(inst, lambda st: found.append(st) if not found and score(st) else None)
    base = assignment_from_state(ex, found[0])
    top = next(p for p in found[0].placements if p.level == 2)
    ptop = inst.part_id(top.digit, top.copy)
    low = next(inst.part_id(p.digit, p.copy) for p in found[0].placements if p.level == 1)
    unused = next(p for p in range(1, inst.n + 1) if base[var("Y", p)] == 0)
    cells = [(i, j) for i in range(2, 7) for j in range(2, 7)]

    def halo_cell(a):
        i, j = next((i, j) for i, j in cells if a[var("Gp", 2, ptop, i, j)] == 0 and a[var("G", 2, i, j)] == 0)
        a[var("Gp", 2, ptop, i, j)] = 2
        a[var("G2", 2, ptop, i, j)] = 1

    def drop_aspect(a):
        i, j = next((i, j) for i, j in cells if a[var("Gp", 2, ptop, i, j)] == 1)
        a[var("G1", 2, ptop, i, j)] = 0

    def grid_cell(a):
        i, j = next((i, j) for i, j in cells if a[var("G", 1, i, j)] == 0)
        a[var("G", 1, i, j)] = low

    edits = {
        1: lambda a: a.__setitem__(var("D", 1), unused),
        2: halo_cell,
        3: lambda a: a.__setitem__(var("E", 4), a[var("D", 1)]),
        4: lambda a: a.__setitem__(var("B", low, ptop), 1 - a[var("B", low, ptop)]),
        5: lambda a: a.__setitem__(var("L", ptop), 1),
        6: lambda a: a.__setitem__(var("Y", unused), 1),
        7: drop_aspect,
        8: grid_cell,
        12: lambda a: a.__setitem__("S", a["S"] + 1),
    }
    for no, edit in edits.items():
        a = dict(base)
        edit(a)
        yield no, ex, a

    # structural corruptions: states the engine would refuse, built with the unchecked commit
    two = Instance.from_variant("K-2-1-2", deck=[1, 2], s=12, l_top=2)
    empty = BoardState.empty(two)
    first = apply(empty, legal_placements(empty, 1)[0])
    far = next(x for x in two.geometry().anchors(2) if x.row >= 6 and x.col >= 6)
    detached = _commit(first, Placement(2, 2, 1, 1, far.orientation, far.row, far.col), far.cells)
    ex2 = export_model(two)
    yield 9, ex2, assignment_from_state(ex2, detached)

    one = Instance.from_variant("K-1-1-1", deck=[1], s=12, l_top=2)
    x = one.geometry().anchors(1)[0]
    floating = _commit(BoardState.empty(one), Placement(1, 1, 1, 2, x.orientation, x.row, x.col), x.cells)
    ex3 = export_model(one)
    yield 10, ex3, assignment_from_state(ex3, floating)

    pair = Instance.from_variant("K-9-1-2", deck=[8, 7], s=10, l_top=2)
    eight = apply(BoardState.empty(pair), Placement(1, 8, 1, 1, 0, 1, 1))
    seven = pair.geometry().anchor(7, 0, 1, 1)
    perched = _commit(eight, Placement(2, 7, 1, 2, 0, 1, 1), seven.cells)  # rests on the 8 alone
    ex4 = export_model(pair)
    yield 11, ex4, assignment_from_state(ex4, perched)


def test_criterion_8_round_trip(record_criterion):
    t0 = time.monotonic()
    terminals = collect_terminals()
    sound = 0
    scoring = 0
    for state in terminals:
        ex = export_model(state.instance)
        a = assignment_from_state(ex, state)
        if verify_assignment(ex, a) is None and a["S"] == score(state):
            sound += 1
        scoring += score(state) > 0
    detected = {}
    for no, ex, a in corruption_cases():
        first = verify_assignment(ex, a)
        classes = {v.paper_no for v in violations(ex, a)}
        # (6) is downstream of (1) and (4): the first record that fails is (1)
        detected[no] = first is not None and no in classes and (first.paper_no == no or no == 6)
    elapsed = time.monotonic() - t0
    ok = (len(terminals) == 50 and sound == 50 and sorted(detected) == list(range(1, 13))
          and all(detected.values()) and elapsed < 120)
    record_criterion(8, "round trip: 50 terminals verify, every constraint class catches a corruption", ok,
                     f"{sound}/50 sound ({scoring} scoring), classes detected "
                     f"{sorted(n for n, d in detected.items() if d)}, {elapsed:.1f}s")


# 9 -----------------------------------------------------------------------------------

def test_criterion_9_standard_game_substitute(record_criterion):
    inst = Instance.from_variant("F-9-2-20", s=20, l_top=7)
    result = greedy_playout(inst, seed=2017)
    state = replay(inst, result.state.placements, result.deck)
    check_state(state)
    ok = (not result.dead_end and state.is_terminal and score(state) == result.score
          and state.levels == result.state.levels)
    record_criterion(9, "standard game: greedy seeded playout is legal (score reported, not asserted)", ok,
                     f"seed 2017, score {result.score}, top level {state.top_level()}; "
                     "the true optimum and the 229-point record are out of desk reach")
