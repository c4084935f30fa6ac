"""Grammar classes, ordered enumeration, and the two synthesizers.

The oracle for `enumerate_formulas` and `synthesize` is an independent
brute-force construction: materialize every DNF of the class with
itertools.combinations, sort by the candidate order, and compare. It shares
no code with the lazy heap-merged stream it checks.
"""

import itertools
import json
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacexplain import (
    FALSE,
    TRUE,
    And,
    Atom,
    BoolAtom,
    Grammar,
    GrammarError,
    GrammarFeature,
    InconsistentSampleError,
    Not,
    Or,
    Sample,
    SynthesisDeadlineError,
    compare,
    default_grammar,
    enumerate_formulas,
    evaluate,
    export_sygus_if,
    is_consistent,
    order_key,
    render,
    size,
    synthesize,
    synthesize_general,
)


def brute_force_class(g):
    lits = []
    for f in g.features:
        if f.kind == "bool":
            lits.append(BoolAtom(f.index))
            lits.append(Not(BoolAtom(f.index)))
        else:
            for op in f.ops:
                for c in f.constants:
                    lits.append(Atom(f.index, op, c))
    clauses = []
    for k in range(1, g.max_literals_per_clause + 1):
        for combo in itertools.combinations(lits, k):
            clauses.append(combo[0] if k == 1 else And(combo))
    out = [FALSE, TRUE] if g.include_constants else []
    for m in range(1, g.max_clauses + 1):
        for chosen in itertools.combinations(clauses, m):
            out.append(chosen[0] if m == 1 else Or(chosen))
    out.sort(key=order_key)
    return out


BOOL2 = Grammar(
    (GrammarFeature(0, "bool"), GrammarFeature(1, "bool")),
    max_clauses=2,
    max_literals_per_clause=2,
)
REAL1 = Grammar(
    (GrammarFeature(0, "real", (0.25, 0.75), ("<", ">")),),
    max_clauses=2,
    max_literals_per_clause=2,
)
MIXED = Grammar(
    (GrammarFeature(0, "bool"), GrammarFeature(1, "real", (0.5,), ("<", ">"))),
    max_clauses=2,
    max_literals_per_clause=3,
)


@pytest.mark.parametrize("g", [BOOL2, REAL1, MIXED], ids=["bool2", "real1", "mixed"])
def test_enumeration_equals_brute_force(g):
    want = brute_force_class(g)
    got = list(enumerate_formulas(g))
    assert got == want


def test_enumeration_class_size_frozen():
    # 4 literals, 4+6 clauses, 10+45 DNFs, plus the two constants
    assert len(list(enumerate_formulas(BOOL2))) == 57


def test_enumeration_first_candidates_frozen():
    g = Grammar((GrammarFeature(0, "bool"),), max_clauses=1, max_literals_per_clause=1)
    assert [render(f) for f in enumerate_formulas(g)] == [
        "false",
        "true",
        "x0",
        "(not x0)",
    ]


@pytest.mark.parametrize("g", [BOOL2, REAL1, MIXED], ids=["bool2", "real1", "mixed"])
def test_enumeration_strictly_increasing_and_unique(g):
    stream = list(enumerate_formulas(g))
    for prev, nxt in zip(stream, stream[1:]):
        assert compare(prev, nxt) == -1
    assert len({render(f) for f in stream}) == len(stream)


def test_enumeration_respects_bounds():
    g = Grammar(
        (GrammarFeature(0, "bool"), GrammarFeature(1, "bool"), GrammarFeature(2, "bool")),
        max_clauses=2,
        max_literals_per_clause=2,
    )
    for f in enumerate_formulas(g):
        clauses = f.children if isinstance(f, Or) else (f,)
        assert len(clauses) <= 2
        for clause in clauses:
            assert size(clause) <= 2


def test_enumeration_without_constants():
    g = Grammar(
        (GrammarFeature(0, "bool"),),
        max_clauses=1,
        max_literals_per_clause=1,
        include_constants=False,
    )
    assert [render(f) for f in enumerate_formulas(g)] == ["x0", "(not x0)"]


# --- samples -----------------------------------------------------------------


def test_sample_add_and_duplicates():
    s = Sample()
    assert s.add((0.0, 1.0), 1) is True
    assert s.add((0.0, 1.0), 1) is False
    assert len(s) == 1
    with pytest.raises(InconsistentSampleError):
        s.add((0.0, 1.0), 0)
    with pytest.raises(ValueError):
        s.add((1.0, 1.0), 2)
    s.add((1.0, 1.0), 0)
    assert s.positives() == [(0.0, 1.0)]
    assert s.negatives() == [(1.0, 1.0)]
    assert s.entries == [((0.0, 1.0), 1), ((1.0, 1.0), 0)]


def test_sample_from_iterable_and_is_consistent():
    s = Sample([((1.0, 0.0), 1), ((0.0, 0.0), 0)])
    assert is_consistent(BoolAtom(0), s)
    assert not is_consistent(Not(BoolAtom(0)), s)
    assert is_consistent(TRUE, Sample())


# --- occam synthesis ----------------------------------------------------------


GRID = (0.0, 0.3, 0.6, 1.0)
sample_points = st.lists(
    st.tuples(st.sampled_from(GRID), st.sampled_from(GRID), st.sampled_from(GRID)),
    min_size=0,
    max_size=6,
)
grammars = st.sampled_from(
    [
        BOOL2,
        MIXED,
        Grammar(
            (
                GrammarFeature(1, "real", (0.25, 0.5), ("<", ">")),
                GrammarFeature(2, "bool"),
            ),
            max_clauses=2,
            max_literals_per_clause=2,
        ),
        Grammar(
            (GrammarFeature(0, "bool"), GrammarFeature(2, "bool")),
            max_clauses=2,
            max_literals_per_clause=2,
            include_constants=False,
        ),
    ]
)


@given(grammars, sample_points, st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_synthesize_equals_first_consistent_scan(g, points, rnd):
    sample = Sample()
    for x in points:
        label = rnd.choice((0, 1))
        try:
            sample.add(x, label)
        except InconsistentSampleError:
            pass
    want = next(
        (f for f in enumerate_formulas(g) if is_consistent(f, sample)), None
    )
    got = synthesize(sample, g)
    assert got == want
    if got is not None:
        assert is_consistent(got, sample)


def test_synthesize_empty_sample_returns_least_candidate():
    assert synthesize(Sample(), BOOL2) is FALSE
    noconst = Grammar(
        (GrammarFeature(0, "bool"),),
        max_clauses=1,
        max_literals_per_clause=1,
        include_constants=False,
    )
    assert synthesize(Sample(), noconst) == BoolAtom(0)


def test_synthesize_constants_cover_pure_samples():
    g = BOOL2
    only_neg = Sample([((0.0, 0.0), 0), ((1.0, 1.0), 0)])
    assert synthesize(only_neg, g) is FALSE
    only_pos = Sample([((0.0, 0.0), 1), ((1.0, 1.0), 1)])
    assert synthesize(only_pos, g) is TRUE


def test_synthesize_exhausts_class_to_none():
    g = Grammar((GrammarFeature(0, "bool"),), max_clauses=2, max_literals_per_clause=2)
    # the two points agree on feature 0, so no formula over it separates them
    sample = Sample([((0.0, 0.0), 1), ((0.0, 1.0), 0)])
    assert synthesize(sample, g) is None


def test_synthesize_finds_known_minimal_formula():
    g = default_grammar(["bool"] * 3, max_clauses=2, max_literals_per_clause=2)
    target = Or((And((BoolAtom(0), Not(BoolAtom(1)))), BoolAtom(2)))
    sample = Sample()
    for bits in itertools.product((0.0, 1.0), repeat=3):
        sample.add(bits, int(evaluate(target, bits)))
    assert synthesize(sample, g) == target


def test_synthesize_deadline_fires():
    g = default_grammar(["bool"] * 10, max_clauses=2, max_literals_per_clause=4)
    sample = Sample()
    # xor labels over the first two features: thousands of candidates precede
    # the first consistent one, so an already-expired deadline must fire
    for a in (0.0, 1.0):
        for b in (0.0, 1.0):
            sample.add((a, b) + (0.0,) * 8, int(a != b))
    with pytest.raises(SynthesisDeadlineError):
        synthesize(sample, g, deadline=time.perf_counter() - 1.0)
    # without a deadline the scan reaches the two-clause xor form
    assert synthesize(sample, g) == Or(
        (
            And((BoolAtom(0), Not(BoolAtom(1)))),
            And((BoolAtom(1), Not(BoolAtom(0)))),
        )
    )


# --- general (cover) synthesis -------------------------------------------------


CELL_G = Grammar(
    (GrammarFeature(0, "real", (0.25, 0.5, 0.75), ("<", ">")),),
    max_clauses=8,
    max_literals_per_clause=4,
)


def test_cover_brackets_interior_point():
    s = Sample([((0.3,), 1)])
    assert render(synthesize_general(s, CELL_G)) == "(and (< x0 0.5) (> x0 0.25))"


def test_cover_widens_on_constant_point():
    s = Sample([((0.5,), 1)])
    assert render(synthesize_general(s, CELL_G)) == "(and (< x0 0.75) (> x0 0.25))"


def test_cover_edge_bins_use_single_literal():
    assert render(synthesize_general(Sample([((0.1,), 1)]), CELL_G)) == "(< x0 0.25)"
    assert render(synthesize_general(Sample([((0.9,), 1)]), CELL_G)) == "(> x0 0.75)"


def test_cover_pins_boolean_features():
    g = Grammar(
        (GrammarFeature(0, "bool"), GrammarFeature(1, "bool")),
        max_clauses=4,
        max_literals_per_clause=4,
    )
    s = Sample([((1.0, 0.0), 1)])
    assert render(synthesize_general(s, g)) == "(and x0 (not x1))"


def test_cover_merges_points_in_one_cell():
    s = Sample([((0.3,), 1), ((0.35,), 1)])
    f = synthesize_general(s, CELL_G)
    assert render(f) == "(and (< x0 0.5) (> x0 0.25))"


def test_cover_unions_distinct_cells():
    s = Sample([((0.3,), 1), ((0.6,), 1)])
    f = synthesize_general(s, CELL_G)
    assert isinstance(f, Or)
    assert len(f.children) == 2
    assert is_consistent(f, s)


def test_cover_rejects_negative_in_covered_cell():
    s = Sample([((0.3,), 1), ((0.4,), 0)])
    assert synthesize_general(s, CELL_G) is None


def test_cover_keeps_negative_in_other_cell():
    s = Sample([((0.3,), 1), ((0.6,), 0)])
    f = synthesize_general(s, CELL_G)
    assert f is not None
    assert is_consistent(f, s)


def test_cover_respects_bounds():
    tight = Grammar(
        (GrammarFeature(0, "real", (0.25, 0.5, 0.75), ("<", ">")),),
        max_clauses=1,
        max_literals_per_clause=4,
    )
    s = Sample([((0.3,), 1), ((0.6,), 1)])
    assert synthesize_general(s, tight) is None
    narrow = Grammar(
        (GrammarFeature(0, "real", (0.25, 0.5, 0.75), ("<", ">")),),
        max_clauses=8,
        max_literals_per_clause=1,
    )
    assert synthesize_general(Sample([((0.3,), 1)]), narrow) is None


def test_cover_empty_sample():
    assert synthesize_general(Sample(), CELL_G) is FALSE
    noconst = Grammar(
        (GrammarFeature(0, "real", (0.5,), ("<", ">")),),
        max_clauses=2,
        max_literals_per_clause=2,
        include_constants=False,
    )
    assert synthesize_general(Sample(), noconst) is None


@given(
    st.lists(
        st.tuples(
            st.floats(0, 1, allow_nan=False).filter(lambda v: v not in (0.25, 0.5, 0.75)),
            st.sampled_from((0.0, 1.0)),
        ),
        min_size=1,
        max_size=12,
    )
)
@settings(max_examples=60, deadline=None)
def test_cover_consistent_whenever_it_returns(entries):
    g = Grammar(
        (GrammarFeature(0, "real", (0.25, 0.5, 0.75), ("<", ">")), GrammarFeature(1, "bool")),
        max_clauses=16,
        max_literals_per_clause=4,
    )
    sample = Sample()
    for x, flag in entries:
        try:
            sample.add((x, flag), 1 if x > 0.5 else 0)
        except InconsistentSampleError:
            pass
    f = synthesize_general(sample, g)
    assert f is not None
    assert is_consistent(f, sample)


# --- grammar -------------------------------------------------------------------


def test_grammar_validation():
    with pytest.raises(GrammarError):
        Grammar((GrammarFeature(0, "bool"),), max_clauses=0)
    with pytest.raises(GrammarError):
        Grammar((GrammarFeature(0, "bool"),), max_literals_per_clause=0)
    with pytest.raises(GrammarError):
        Grammar((GrammarFeature(0, "bool"), GrammarFeature(0, "bool")))
    with pytest.raises(GrammarError):
        Grammar(("x0",))
    with pytest.raises(GrammarError):
        GrammarFeature(0, "real", (0.5,), ("<", "<="))
    with pytest.raises(GrammarError):
        GrammarFeature(0, "complex")


def test_grammar_feature_normalization():
    f = GrammarFeature(2, "real", (0.75, 0.25), (">", "<"))
    assert f.constants == (0.25, 0.75)
    b = GrammarFeature(1, "bool", (0.5,), ("<",))
    assert b.constants == ()
    assert b.ops == ()


def test_grammar_sorts_features_by_index():
    g = Grammar((GrammarFeature(3, "bool"), GrammarFeature(1, "bool")))
    assert [f.index for f in g.features] == [1, 3]


def test_grammar_literals_sorted():
    lits = MIXED.literals()
    keys = [order_key(l) for l in lits]
    assert keys == sorted(keys)
    assert BoolAtom(0) in lits
    assert Not(BoolAtom(0)) in lits
    assert Atom(1, "<", 0.5) in lits


def test_grammar_json_round_trip():
    g = Grammar(
        (
            GrammarFeature(0, "bool", name="hair"),
            GrammarFeature(2, "real", (0.25, 0.5), ("<", ">"), name="age"),
        ),
        max_clauses=3,
        max_literals_per_clause=5,
        include_constants=False,
    )
    back = Grammar.from_json(json.loads(json.dumps(g.to_json())))
    assert back == g


def test_grammar_from_json_resolves_names_and_positions():
    names = ["hair", "age"]
    g = Grammar.from_json(
        {"features": [{"name": "age", "kind": "real", "constants": [0.5], "ops": ["<"]}]},
        names,
    )
    assert g.features[0].index == 1
    with pytest.raises(GrammarError):
        Grammar.from_json({"features": [{"name": "height"}]}, names)
    positional = Grammar.from_json({"features": [{"kind": "bool"}, {"kind": "bool"}]})
    assert [f.index for f in positional.features] == [0, 1]
    with pytest.raises(GrammarError):
        Grammar.from_json({})


def test_default_grammar_kinds():
    g = default_grammar(["bool", "real"], names=["a", "b"])
    assert g.features[0].kind == "bool"
    assert g.features[1].constants == (0.25, 0.5, 0.75)
    assert g.features[1].ops == ("<", ">")
    assert g.features[1].name == "b"
    assert g.max_clauses == 2
    assert g.max_literals_per_clause == 4


# --- SyGuS export ----------------------------------------------------------------


def test_export_sygus_frozen_example():
    g = Grammar((GrammarFeature(0, "bool"),), max_clauses=2, max_literals_per_clause=2)
    sample = Sample([((1.0, 0.0), 1)])
    text = export_sygus_if(sample, g)
    assert text == (
        "(set-logic LRA)\n"
        "(synth-fun explain ((x0 Real) (x1 Real)) Bool\n"
        "  ((Start Bool) (Clause Bool) (Lit Bool))\n"
        "  ((Start Bool (true false Clause (or Clause Start)))\n"
        "   (Clause Bool (Lit (and Lit Clause)))\n"
        "   (Lit Bool ((= x0 1.0) (not (= x0 1.0))))))\n"
        "(constraint (= (explain 1.0 0.0) true))\n"
        "(check-synth)\n"
    )


def test_export_sygus_structure():
    g = Grammar(
        (GrammarFeature(0, "real", (0.25,), ("<", ">")), GrammarFeature(1, "bool")),
        max_clauses=2,
        max_literals_per_clause=2,
    )
    sample = Sample([((0.1, 1.0), 1), ((0.8, 0.0), 0)])
    text = export_sygus_if(sample, g, feature_names=["hours per week", "has fins"])
    lines = text.strip().splitlines()
    assert lines[0] == "(set-logic LRA)"
    assert lines[-1] == "(check-synth)"
    assert sum(1 for l in lines if l.startswith("(constraint")) == len(sample)
    assert "hours_per_week" in text
    assert "has_fins" in text
    assert "(constraint (= (explain 0.8 0.0) false))" in text


def test_export_sygus_negative_constants_and_arity():
    g = Grammar(
        (GrammarFeature(0, "real", (-0.5,), ("<",)),),
        max_clauses=1,
        max_literals_per_clause=1,
    )
    text = export_sygus_if(Sample(), g, arity=1)
    assert "(< x0 (- 0.5))" in text
    inferred = export_sygus_if(Sample(), g)
    assert "(synth-fun explain ((x0 Real)) Bool" in inferred


def test_export_sygus_infers_arity_from_names():
    g = Grammar((GrammarFeature(0, "bool"),))
    text = export_sygus_if(Sample(), g, feature_names=["a", "b", "c"])
    assert "((a Real) (b Real) (c Real))" in text
