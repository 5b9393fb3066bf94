import pytest

from mslh.approximation import (
    ApproxTrace,
    HornStep,
    LinearStep,
    MonadicStep,
    PairingStep,
    RuleNotApplicable,
    ShallowStep,
    approximate,
    apply_step,
    default_split,
    horn_step,
    linear_step,
    monadic_step,
    project,
    replay,
    shallow_step,
    unproject,
    MalformedProjection,
    _KIND_ORDER,
)
from mslh.terms import classify, depth, positive_duplicate_count, subst_clause, Var

from helpers import cl, cls, clause_set_equal, clause_sets_isomorphic, variants


INTRO = cls(
    "s(X) -> p(X, g(X))",
    "-> s(a)",
    "-> s(b)",
    "-> s(g(X))",
    "p(a, g(b)) ->",
    "p(g(X), g(g(X))) ->",
)

INTRO_MSLH = cls(
    "s(X), s_0(Y) -> t(f_p(X, Y))",
    "s(X) -> s_0(g(X))",
    "-> s(a)",
    "-> s(b)",
    "-> s(g(X))",
    "t(f_p(a, g(b))) ->",
    "t(f_p(g(X), g(g(X)))) ->",
)


# ---------------------------------------------------------------------------
# Single rules


def test_monadic_step_rewrites_all_occurrences():
    n = cls("-> p(X, Xp)", "p(Y, a), p(Z, b) ->")
    out, steps = monadic_step(n, "p")
    assert clause_set_equal(out, cls("-> t(f_p(X, Xp))",
                                     "t(f_p(Y, a)), t(f_p(Z, b)) ->"))
    assert len(steps) == 2
    assert all(not any(a.pred == "p" for a in c.atoms()) for c in out)


def test_monadic_step_on_monadic_pred_rejected():
    with pytest.raises(RuleNotApplicable):
        monadic_step(cls("-> q(a)"), "q")


def test_horn_step_keeps_chosen_literal():
    n = cls("p(a, b) ->", "-> p(X, b), p(a, Y)")
    out, step = horn_step(n, n[1], keep_index=0)
    assert clause_set_equal(out, cls("p(a, b) ->", "-> p(X, b)"))
    assert step.ancestor == 1


def test_horn_step_second_literal():
    n = cls("-> p(a), q(a)", "p(X) ->")
    out, _ = horn_step(n, n[0], keep_index=0)
    assert clause_set_equal(out, cls("-> p(a)", "p(X) ->"))


def test_horn_step_on_horn_clause_rejected():
    n = cls("-> p(a)")
    with pytest.raises(RuleNotApplicable):
        horn_step(n, n[0])


def test_shallow_step_example():
    n = cls("p(X), q(Y) -> r(X, f(Y))")
    out, step = shallow_step(n, n[0], (2,))
    assert clause_sets_isomorphic(
        out, cls("s_0(Xp), p(X) -> r(X, Xp)", "q(Y) -> s_0(f(Y))"))
    assert step.pos == (2,)


def test_shallow_step_rejects_variable_subterm():
    n = cls("-> r(X, f(Y))")
    with pytest.raises(RuleNotApplicable):
        shallow_step(n, n[0], (1,))


def test_shallow_split_minimizes_shared_variables():
    n = cls("p(X) -> q(f(f(X)))")
    out, step = shallow_step(n, n[0], (1, 1))
    # p(X) shares X with the extracted subterm f(X), not with the hole side
    assert clause_sets_isomorphic(out, cls("s_0(Y) -> q(f(Y))", "p(X) -> s_0(f(X))"))


def test_linear_step_example():
    n = cls("-> p(X, X)")
    out, step = linear_step(n, n[0], "x", (1,), (2,))
    assert len(out) == 1
    assert variants(out[0], cl("-> p(X, Xp)"))
    assert not step.gamma_duplicated


def test_linear_step_duplicates_gamma():
    n = cls("s(X) -> t(f_p(X, g(X)))")
    out, step = linear_step(n, n[0], "x", (1, 1), (1, 2, 1))
    assert step.gamma_duplicated
    assert variants(out[0], cl("s(X0), s(X) -> t(f_p(X, g(X0)))"))


def test_linear_step_rejects_bad_positions():
    n = cls("-> p(X, Y)")
    with pytest.raises(RuleNotApplicable):
        linear_step(n, n[0], "x", (1,), (2,))


# ---------------------------------------------------------------------------
# Full approximation


def test_intro_approximation_matches_listing():
    out, trace = approximate(INTRO)
    assert clause_sets_isomorphic(out, INTRO_MSLH)
    assert classify(out).is_mslh
    kinds = [s.kind for s in trace.steps]
    assert kinds == ["monadic", "monadic", "monadic", "linear", "shallow"]


def test_already_mslh_identity():
    n = cls("-> p(a)", "p(X) -> q(f(X))", "q(X) ->")
    out, trace = approximate(n)
    assert out == n
    assert trace.steps == []


def test_parity_approximation_matches_listing():
    n = cls("-> p(a)", "p(f(a)) ->", "p(X) -> p(f(f(X)))", "p(f(f(X))) -> p(X)")
    out, trace = approximate(n)
    expected = cls(
        "-> p(a)",
        "p(f(a)) ->",
        "s_0(Y) -> p(f(Y))",
        "p(X) -> s_0(f(X))",
        "p(f(f(X))) -> p(X)",
    )
    assert clause_sets_isomorphic(out, expected)


def test_shallow_example_after_linear():
    n = cls("-> p(f(X, g(X)))")
    out, trace = approximate(n)
    expected = cls("s_0(Z) -> p(f(X, Z))", "-> s_0(g(Y))")
    assert clause_sets_isomorphic(out, expected)
    kinds = [s.kind for s in trace.steps]
    assert kinds == ["linear", "shallow"]


def test_pairing_normalizes_wide_clauses():
    n = cls("-> p(X), q(X), r(Y)")
    out, trace = approximate(n)
    assert classify(out).is_mslh
    assert any(isinstance(s, PairingStep) for s in trace.steps)
    assert any(isinstance(s, HornStep) for s in trace.steps)


def test_kind_preference_order():
    n = cls(
        "-> p(X, X), q(f(f(X))), r(a)",
        "p(a, b), q(b) -> r(g(g(a)))",
    )
    out, trace = approximate(n)
    assert classify(out).is_mslh
    kinds = [_KIND_ORDER[s.kind] for s in trace.steps]
    assert kinds == sorted(kinds)


def test_trace_replay_reproduces_output():
    for n in (INTRO, cls("-> p(X), q(X), r(f(f(Y)))", "p(a) ->")):
        out, trace = approximate(n)
        assert replay(trace) == out
        assert trace.final == out


def test_trace_resolves_roots():
    out, trace = approximate(INTRO)
    for c in out:
        root = trace.resolve_root(c.cid)
        assert root in {c0.cid for c0 in INTRO}


def test_termination_measures_decrease():
    sets = None
    n = cls(
        "-> p(X, X), q(f(f(X))), r(a)",
        "s(X) -> p(X, g(X))",
        "p(g(X), g(g(X))) ->",
    )
    out, trace = approximate(n)
    snaps = trace.sets()
    for before, step, after in zip(snaps, trace.steps, snaps[1:]):
        anc = next(c for c in before if c.cid == step.ancestor)
        produced = [c for c in after if c.cid in step.produced]
        if isinstance(step, MonadicStep):
            def nonmon(cs):
                return sum(1 for c in cs for a in c.atoms() if len(a.args) > 1)
            assert nonmon(after) < nonmon(before)
        elif isinstance(step, PairingStep):
            def excess(cs):
                return sum(max(0, len(c.pos) - 2) for c in cs)
            assert excess(after) < excess(before)
        elif isinstance(step, HornStep):
            def nonhorn(cs):
                return sum(1 for c in cs if not c.is_horn)
            assert nonhorn(after) < nonhorn(before)
        elif isinstance(step, LinearStep):
            def dups(cs):
                return sum(positive_duplicate_count(c) for c in cs)
            assert dups(after) < dups(before)
        elif isinstance(step, ShallowStep):
            for c in produced:
                assert _depth_multiset(c) < _depth_multiset(anc) or \
                    _multiset_less(_depth_multiset(c), _depth_multiset(anc))


def _depth_multiset(c):
    from mslh.terms import term_positions
    out = []
    for a in c.pos:
        for _, sub in term_positions(a):
            out.append(depth(sub))
    return sorted(out, reverse=True)


def _multiset_less(a, b):
    """Dershowitz-Manna: a < b iff a != b and every extra element of a is
    dominated by some extra element of b."""
    from collections import Counter
    ca, cb = Counter(a), Counter(b)
    extra_a = ca - cb
    extra_b = cb - ca
    if not extra_b and not extra_a:
        return False
    return all(any(x < y for y in extra_b.elements()) for x in extra_a.elements())


# ---------------------------------------------------------------------------
# Projection


def test_unproject_core_example():
    n = cls("-> t(f_p(Y, a))", "-> t(f_p(Z, b))", "t(f_p(Y, a)), t(f_p(Z, b)) ->")
    got = unproject(n, "p")
    assert clause_set_equal(got, cls("-> p(Y, a)", "-> p(Z, b)",
                                     "p(Y, a), p(Z, b) ->"))


def test_project_unproject_roundtrip():
    n = cls("p(X, Y) -> q(X, g(Y))", "-> p(a, b)")
    assert unproject(project(n, "p"), "p") == n
    assert project(n, "r") == n


def test_unproject_rejects_nested_projection_function():
    n = cls("-> q(g(f_p(a, b)))")
    with pytest.raises(MalformedProjection):
        unproject(n, "p")


# ---------------------------------------------------------------------------
# Soundness at desk scale: approximation satisfiable => original satisfiable


def test_over_approximation_on_random_sets():
    import random

    from mslh.ground import ground_sat, herbrand_expand
    from mslh.terms import Signature

    rng = random.Random(7)
    preds = [("p", 1), ("q", 2), ("r", 1)]
    fns = [("a", 0), ("b", 0), ("f", 1), ("g", 2)]

    def rand_term(d, vars_):
        if d == 0 or rng.random() < 0.4:
            if vars_ and rng.random() < 0.5:
                return Var(rng.choice(vars_))
            return __import__("mslh.terms", fromlist=["App"]).App(
                rng.choice(["a", "b"]))
        fn, k = rng.choice([f for f in fns if f[1] > 0])
        from mslh.terms import App
        return App(fn, tuple(rand_term(d - 1, vars_) for _ in range(k)))

    def rand_atom(vars_):
        from mslh.terms import Atom
        pr, k = rng.choice(preds)
        return Atom(pr, tuple(rand_term(1, vars_) for _ in range(k)))

    for trial in range(40):
        vars_ = ["x", "y"][: rng.randint(0, 2)]
        n = []
        for i in range(rng.randint(1, 4)):
            neg = [rand_atom(vars_) for _ in range(rng.randint(0, 2))]
            pos = [rand_atom(vars_) for _ in range(rng.randint(0, 2))]
            n.append(cl(" ->", cid=i).__class__(tuple(neg), tuple(pos), i))
        if not any(c.pos for c in n):
            continue
        out, trace = approximate(n)
        sig = trace.signature
        if not sig.constants():
            continue
        try:
            approx_ground = herbrand_expand(out, sig, 2, budget=30_000)
            orig_ground = herbrand_expand(n, sig, 2, budget=30_000)
        except Exception:
            continue
        if ground_sat(approx_ground):
            # over-approximation: bounded oracle must not refute the original
            assert ground_sat(orig_ground)
