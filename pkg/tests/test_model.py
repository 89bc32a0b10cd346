import itertools
from pathlib import Path

import pytest

from nmbr9.model.automaton import (
    Dfa, compile, count_accepted, minimize, subset_construction, word_for, words,
)
from nmbr9.model.export import (
    AssignmentError, assignment_from_state, derive_auxiliary, export_model, loads, referenced_variables,
    scope, var, verify_assignment, violations, _check,
)
from nmbr9.model.regex import Alt, Cat, Sym, build_regex, exactly, star, to_text
from nmbr9.oracle import best_score_bruteforce, enumerate_terminals
from nmbr9.rules import Geometry, Instance, Placement, replay, score
from nmbr9.shapes import RING, Shape, default_catalog, distinct_orientations

GOLDEN = Path(__file__).parent / "golden" / "r0.txt"


def instance(variant, deck=None, s=7, l_top=2):
    return Instance.from_variant(variant, deck=deck, s=s, l_top=l_top)


# -- regex ----------------------------------------------------------------------------

def test_r0_matches_golden():
    assert build_regex(distinct_orientations(RING), 20, digit=0).text() == GOLDEN.read_text().strip()


def test_r0_placed_words_have_fourteen_halo_symbols():
    regex = build_regex(distinct_orientations(RING), 8)
    assert regex.text().count("|") == 2  # two orientations, then the absent branch
    placed = [w for w in words(compile(regex), 65) if w[0] == "1"]
    assert placed and all(w.count("2") == 14 and w.count("1") == 11 for w in placed)
    # the hole cells stay 0: the two cells inside the first ring placed at (1, 1)
    first = placed[-1] if placed[-1][1 + 8 + 1] == "2" else placed[0]
    grid = first[1:]
    assert grid[2 * 8 + 2] == "0" and grid[3 * 8 + 2] == "0"


def test_single_cell_body_at_s4():
    one = Shape.from_rows(["#"])
    assert build_regex(distinct_orientations(one), 4).text(symbolic=False) == "10^*20^22120^220^*|00^*"


def test_regex_rejects_oversized_shape():
    eight = distinct_orientations(default_catalog()[8])
    with pytest.raises(ValueError):
        build_regex(eight, 6)
    assert build_regex(eight, 6, strict=False).text() == "00^*"


def test_zero_plus_automaton():
    dfa = compile(Cat((Sym("0"), star(Sym("0")))))
    assert dfa.n_states == 2
    assert count_accepted(dfa, 5) == 1
    assert count_accepted(dfa, 0) == 0
    assert dfa.completed().is_complete() and dfa.completed().n_states == 3


def test_bounded_repetition():
    dfa = compile(exactly(Sym("2"), 3))
    assert [count_accepted(dfa, n) for n in range(5)] == [0, 0, 0, 1, 0]
    assert to_text(exactly(Sym("2"), 3)) == "2^3"


def test_minimize_is_idempotent():
    node = build_regex(distinct_orientations(RING), 8).node
    once = minimize(subset_construction(node))
    assert minimize(once) == once
    exact = compile(build_regex(distinct_orientations(RING), 8), exact_length=True)
    assert minimize(exact) == exact


def test_minimize_merges_equivalent_states():
    # (0|2)0* written redundantly as 0 0* | 2 0*
    node = Alt((Cat((Sym("0"), star(Sym("0")))), Cat((Sym("2"), star(Sym("0"))))))
    dfa = compile(node)
    assert dfa.n_states == 2
    assert dfa.accepts("2000") and dfa.accepts("0") and not dfa.accepts("1") and not dfa.accepts("")


@pytest.mark.parametrize("s", [6, 7, 8])
@pytest.mark.parametrize("digit", range(10))
def test_language_is_exactly_the_placements(digit, s):
    """Accepted words of length 1+s^2 equal the words of the engine's anchors plus the empty word."""
    cat = default_catalog()
    if max(cat[digit].height, cat[digit].width) + 2 > s:
        pytest.skip("shape does not fit")
    dfa = compile(build_regex(cat.orientations(digit), s, digit=digit))
    geo = Geometry(cat, s)
    expected = {word_for(geo.cells_of(a.cells), geo.cells_of(a.halo), s) for a in geo.anchors(digit)}
    expected.add("0" * (1 + s * s))
    got = words(dfa, 1 + s * s)
    assert set(got) == expected and len(got) == len(expected)
    exact = compile(build_regex(cat.orientations(digit), s, digit=digit), exact_length=True)
    assert words(exact, 1 + s * s) == got
    assert count_accepted(exact, s * s) == 0 and count_accepted(exact, 2 + s * s) == 0


def test_r0_at_s8_counts_25():
    dfa = compile(build_regex(distinct_orientations(RING), 8))
    assert count_accepted(dfa, 65) == 25


# -- export ---------------------------------------------------------------------------

def test_regular_count_small():
    ex = export_model(instance("K-1-1-2", deck=[0, 1], s=6, l_top=2))
    assert ex.count("regular") == 4
    assert ex.scope_length == 37
    assert all(len(c["scope"]) == 37 for c in ex.constraints if c["kind"] == "regular")


def test_e_variables_only_when_deck_is_short():
    full = export_model(instance("K-1-1-2", deck=[1, 0], s=6))
    assert not [v for v in full.variables if v.name.startswith("E[")]
    short = export_model(instance("K-1-1-1", deck=[1], s=6))
    assert [v.name for v in short.variables if v.name.startswith("E[")] == ["E[2]"]


def test_k_instance_fixes_deck_domains():
    ex = export_model(instance("K-1-2-3", deck=[1, 0, 1], s=6))
    doms = ex.domains()
    # parts: digit 0 -> 1, 2; digit 1 -> 3, 4; copies in draw order
    assert [doms[var("D", i)] for i in (1, 2, 3)] == [(3, 3), (1, 1), (4, 4)]


def test_border_cells_are_zero():
    ex = export_model(instance("F-1-1-2", s=6))
    doms = ex.domains()
    assert doms["G[1,1,3]"] == (0, 0) and doms["G[2,6,6]"] == (0, 0) and doms["G[1,2,2]"] == (0, 2)


def test_every_variable_is_referenced_and_declared():
    ex = export_model(instance("F-2-1-3", s=6, l_top=2))
    assert referenced_variables(ex) == set(ex.domains())
    for con in ex.constraints:
        assert set(scope(ex, con)) <= set(ex.domains())


def test_constraint_numbers_and_kinds():
    ex = export_model(instance("F-2-1-2", s=6, l_top=2))
    assert {c["paper_no"] for c in ex.constraints} == set(range(1, 13))
    by_no = {}
    for c in ex.constraints:
        by_no.setdefault(c["paper_no"], set()).add(c["kind"])
    assert by_no[1] == {"cardinality"} and by_no[2] == {"regular"} and by_no[3] == {"inverse"}
    assert by_no[4] == {"order-channel"} and by_no[5] == {"int-bool-channel"}
    assert by_no[9] == {"iff", "implication"} and by_no[11] == {"at-least-two-sum"}
    assert by_no[12] == {"linear-objective"}


def test_dumps_round_trip_and_determinism():
    inst = instance("K-2-1-3", deck=[2, 0, 1], s=7, l_top=2)
    text = export_model(inst).dumps()
    assert export_model(inst).dumps() == text
    assert loads(text).dumps() == text
    assert "[automata]" in text and "[search]" in text


def test_search_annotation():
    ex = export_model(instance("F-1-1-2", s=6))
    assert ex.search["decision_order"] == ["D", "L", "Gp"]
    assert ex.search["cell_order"][0] == [4, 4]
    assert len(ex.search["cell_order"]) == 36


def test_missing_and_out_of_domain_values():
    inst = instance("K-1-1-2", deck=[0, 1], s=7)
    ex = export_model(inst)
    state = best_score_bruteforce(inst, keep=1).states[0]
    a = assignment_from_state(ex, state)
    del a["S"]
    with pytest.raises(AssignmentError):
        verify_assignment(ex, a)
    a = assignment_from_state(ex, state)
    a["G[1,1,1]"] = 1
    with pytest.raises(AssignmentError):
        verify_assignment(ex, a)


@pytest.mark.parametrize("variant, deck, s, l_top", [
    ("K-3-1-3", [1, 2, 3], 7, 2),
    ("K-3-1-3", [3, 1, 2], 7, 3),
    ("F-2-1-3", None, 7, 2),
    ("K-1-3-3", [1, 1, 1], 6, 2),
])
def test_round_trip_soundness(variant, deck, s, l_top):
    inst = instance(variant, deck=deck, s=s, l_top=l_top)
    ex = export_model(inst)
    seen = []

    def visit(state):
        a = assignment_from_state(ex, state)
        assert verify_assignment(ex, a) is None
        assert a["S"] == score(state)
        seen.append(state)

    enumerate_terminals(inst, visit)
    assert seen


# -- completeness: exhaustive search over the exported model ---------------------------

def model_solutions(ex):
    """All satisfying assignments of the export, by depth-first search in deck order.

    Variables fixed by a channel constraint take their only consistent value;
    records that mention a single part are checked as soon as that part and every
    part before it are assigned; the rest at the leaves.
    """
    P = ex.params
    n, k, s, L = P["n"], P["k"], P["s"], P["l_top"]
    doms = ex.domains()
    length = 1 + s * s
    lang = {d: words(dfa, length) for d, dfa in ex.automata.items()}
    cells = [(i, j) for i in range(1, s + 1) for j in range(1, s + 1)]

    def part_of(con):
        if "part" in con:
            return con["part"]
        if con["kind"] == "int-bool-channel":
            return int(con["int"][2:-1])
        if con["paper_no"] == 7:
            return con["lhs"][0][2]
        return None

    per_part = {p: [c for c in ex.constraints if part_of(c) == p] for p in range(1, n + 1)}

    if all(doms[var("D", i)][0] == doms[var("D", i)][1] for i in range(1, k + 1)):
        heads = [tuple(doms[var("D", i)][0] for i in range(1, k + 1))]
    else:
        heads = list(itertools.permutations(range(1, n + 1), k))
    for head in heads:
        rest = [p for p in range(1, n + 1) if p not in head]
        for tail in itertools.permutations(rest):
            order = head + tail
            a = {name: 0 for name in doms}
            for i, p in enumerate(order, start=1):
                a[var("D" if i <= k else "E", i)] = p
                a[var("O", p)] = i
            for p in range(1, n + 1):
                for q in range(1, n + 1):
                    if p != q:
                        a[var("B", p, q)] = int(a[var("O", p)] < a[var("O", q)])
                a[var("Y", p)] = int(a[var("O", p)] <= k)
                a[var("N", p)] = 1 - a[var("Y", p)]
            yield from _extend(ex, a, list(order), 0, per_part, lang, cells)


def _extend(ex, a, order, idx, per_part, lang, cells):
    P = ex.params
    L = P["l_top"]
    if idx == len(order):
        for l in range(1, L + 1):
            for i, j in cells:
                owners = [p for p in order if a[var("Gp", l, p, i, j)] == 1]
                a[var("G", l, i, j)] = owners[0] if owners else 0
        a["S"] = sum(v * (a[var("L", p)] - a[var("Y", p)]) for p, v in enumerate(P["values"], start=1))
        if verify_assignment(ex, a) is None:
            yield dict(a)
        return
    p = order[idx]
    digit = P["values"][p - 1]
    levels = [0] if a[var("N", p)] else list(range(1, L + 1))
    for level in levels:
        for word in (lang[digit] if level else [None]):
            touched = []
            a[var("L", p)] = level
            for l in range(1, L + 1):
                a[var("Lb", p, l)] = int(l == level)
                w = word if l == level else "0" * len(lang[digit][0])
                if w[0] != str(a[var("Lb", p, l)]):
                    break
                for pos, ch in enumerate(w[1:]):
                    i, j = divmod(pos, P["s"])
                    g = int(ch)
                    a[var("Gp", l, p, i + 1, j + 1)] = g
                    a[var("G1", l, p, i + 1, j + 1)] = int(g == 1)
                    a[var("G2", l, p, i + 1, j + 1)] = int(g == 2)
            else:
                # (8) admits at most one owner per cell
                clash = level and any(
                    a[var("G1", level, q, i, j)] and a[var("G1", level, p, i, j)]
                    for q in order[:idx] for i, j in cells)
                if not clash:
                    derive_auxiliary(ex, a)
                    if all(_check(ex, con, a) is None for con in per_part[p]):
                        yield from _extend(ex, a, order, idx + 1, per_part, lang, cells)
            for l in range(1, L + 1):
                for i, j in cells:
                    for name in ("Gp", "G1", "G2"):
                        a[var(name, l, p, i, j)] = 0
                a[var("Lb", p, l)] = 0
            a[var("L", p)] = 0


def play_of(inst, ex, a):
    """Engine placements read back from a model assignment."""
    P = ex.params
    geo = inst.geometry()
    s = P["s"]
    drawn = [a[var("D", i)] for i in range(1, P["k"] + 1)]
    out = []
    copies = {}
    for idx, p in enumerate(drawn, start=1):
        digit = P["values"][p - 1]
        level = a[var("L", p)]
        cells = {(i - 1, j - 1) for i in range(1, s + 1) for j in range(1, s + 1)
                 if a[var("Gp", level, p, i, j)] == 1}
        match = [x for x in geo.anchors(digit) if set(geo.cells_of(x.cells)) == cells]
        assert len(match) == 1
        copies[digit] = copies.get(digit, 0) + 1
        x = match[0]
        out.append(Placement(idx, digit, copies[digit], level, x.orientation, x.row, x.col))
    return tuple(out)


@pytest.mark.parametrize("variant, deck, s, l_top", [
    ("K-3-1-3", [1, 2, 3], 7, 2),
    ("K-1-1-1", [1], 6, 2),
    ("F-1-1-2", None, 7, 2),
    ("K-1-3-3", [1, 1, 1], 6, 2),
])
def test_round_trip_completeness(variant, deck, s, l_top):
    inst = instance(variant, deck=deck, s=s, l_top=l_top)
    ex = export_model(inst)
    from_model = set()
    for a in model_solutions(ex):
        play = play_of(inst, ex, a)
        state = replay(inst, play, tuple(p.digit for p in play))
        assert score(state) == a["S"]
        from_model.add(play)
    from_engine = set()
    enumerate_terminals(inst, lambda st: from_engine.add(st.placements))
    assert from_model == from_engine
    assert from_engine
