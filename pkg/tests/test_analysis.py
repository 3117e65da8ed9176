import pytest

from qrhlkit import analysis as an
from qrhlkit import ast as A
from qrhlkit.analysis import Substitution
from qrhlkit.parser import parse_program
from qrhlkit.semantics import deneq_check, init_program

from corpus import generated_programs, handwritten_programs


def P(ws, text):
    return parse_program(text, ws)


# -- the five analyses: hand-applied recursions ------------------------------


def test_fv_local_shadows(ws):
    p = P(ws, "local x; { x <- 1; y <- x }")
    assert an.fv(p) == {"y"}


def test_overwr_seq_equation(ws):
    # overwr(x:=1; y:=x) = {x} ∪ (({y} \ {x}) ∩ ALL) = {x, y}
    p = P(ws, "x <- 1; y <- x")
    assert an.overwr(p) == {"x", "y"}


def test_overwr_assign_removes_read_vars(ws):
    assert an.overwr(P(ws, "x <- (x + 1 % 2)")) == frozenset()
    assert an.overwr(P(ws, "x <- 0")) == {"x"}


def test_overwr_measure_is_X_minus_fv_e(ws):
    # overwr(measure X Q e) = X \ fv e: the measured register is not added
    p = P(ws, "x <m q with compmeas()")
    assert an.overwr(p) == {"x"}


def test_inner_and_covered_on_contexts(ws):
    ctx = P(ws, "local x; { @1; skip }")
    assert an.inner(ctx) == {"x"}
    both = A.seq([P(ws, "local x; { @1 }"), A.Skip()])
    cov = an.covered(both)
    assert not cov.is_all and cov.names == {"x"}


def test_covered_of_program_is_all(ws):
    rep = an.varsets(P(ws, "x <- 1"))
    assert rep.covered.is_all
    assert rep.inner == frozenset()


def test_while_and_qapply_overwrite_nothing(ws):
    assert an.overwr(P(ws, "while x == 1 { x <- 0 }")) == frozenset()
    assert an.overwr(P(ws, "on q apply H")) == frozenset()


def test_written_includes_quantum_touches(ws):
    p = P(ws, "on q apply H; x <m r with compmeas()")
    assert an.written(p) == {"q", "r", "x"}


def test_overwr_subset_fv_union_written_on_corpus(ws):
    for p in handwritten_programs(ws) + generated_programs(ws, count=60, seed=3):
        rep = an.varsets(p)
        assert rep.overwr <= rep.fv | rep.written


# -- substitutions -------------------------------------------------------------


def test_subst_vars_paper_example(ws):
    # (v:=1; local v (v:=1)){v->w} = (w:=1; local v (v:=1))
    p = P(ws, "x <- 1; { local x; { x <- 1 } }")
    sigma = Substitution({ws.var("x"): ws.var("y")})
    out = an.subst_vars(p, sigma)
    assert A.program_equal(out, P(ws, "y <- 1; { local x; { x <- 1 } }"))


def test_full_subst_vars_paper_example(ws):
    p = P(ws, "x <- 1; { local x; { x <- 1 } }")
    sigma = Substitution({ws.var("x"): ws.var("y")})
    out = an.full_subst_vars(p, sigma)
    assert A.program_equal(out, P(ws, "y <- 1; { local y; { y <- 1 } }"))


def test_subst_identity(ws):
    p = P(ws, "x <- 1; q <q ket(0)")
    sigma = Substitution({})
    assert A.program_equal(an.subst_vars(p, sigma), p)
    assert A.program_equal(an.full_subst_vars(p, sigma), p)


def test_subst_qapply_register(ws):
    p = P(ws, "on q apply H")
    sigma = Substitution({ws.var("q"): ws.var("r")})
    assert A.program_equal(an.subst_vars(p, sigma), P(ws, "on r apply H"))


def test_substs_agree_without_locals(ws):
    sigma = Substitution({ws.var("x"): ws.var("y"), ws.var("y"): ws.var("x")})
    for p in handwritten_programs(ws):
        if any(isinstance(s, A.Local) for s in _all_nodes(p)):
            continue
        assert A.program_equal(an.subst_vars(p, sigma), an.full_subst_vars(p, sigma))


def _all_nodes(p):
    yield p
    for c in A.children(p):
        yield from _all_nodes(c)


def test_substitution_compatibility_enforced(ws):
    with pytest.raises(ValueError, match="compatible"):
        Substitution({ws.var("x"): ws.var("q")})


def test_dom_excludes_identity_entries(ws):
    sigma = Substitution({ws.var("x"): ws.var("x"), ws.var("y"): ws.var("x")})
    assert sigma.dom_names() == {"y"}


# -- no_conflict ---------------------------------------------------------------


def test_no_conflict_local_violation(ws):
    sigma = Substitution({ws.var("x"): ws.var("y")})
    p = P(ws, "local y; { x <- 1 }")
    ok, witness = an.no_conflict(sigma, p)
    assert not ok
    assert witness.local_var == "y" and "y" in witness.offending


def test_no_conflict_identity_always(ws):
    sigma = Substitution({})
    for p in handwritten_programs(ws):
        ok, _ = an.no_conflict(sigma, p)
        assert ok


def test_no_conflict_leaf_rules(ws):
    sigma = Substitution({ws.var("x"): ws.var("y")})
    ok, _ = an.no_conflict(sigma, P(ws, "x <- 1"))
    assert ok


def test_no_conflict_shielded_by_binder(ws):
    # the binder resets sigma on its own variable
    sigma = Substitution({ws.var("x"): ws.var("y")})
    ok, _ = an.no_conflict(sigma, P(ws, "local x; { local y; { x <- 1 } }"))
    assert ok


# -- semantic characterizations (small spot checks; the full sweep is in acceptance)


def test_init_overwr_semantics_spot(ws):
    p = P(ws, "x <- 0; q <q ket(0)")
    for v in sorted(an.overwr(p)):
        init = init_program([ws.var(v)])
        assert deneq_check(A.seq([init, p]), p, ws).equal


def test_fv_commutation_spot(ws):
    p = P(ws, "x <- 1")
    touch = P(ws, "on q apply H")
    assert deneq_check(A.seq([p, touch]), A.seq([touch, p]), ws).equal


def test_full_subst_deneq_for_fresh_bijection(ws):
    # renaming away from fv(c) leaves the denotation unchanged
    p = P(ws, "local x; { x <- 1; q <q ket(0) }")
    assert "y" not in an.fv(p)
    sigma = Substitution({ws.var("y"): ws.var("x"), ws.var("x"): ws.var("y")})
    # dom sigma ∩ fv(p) must be empty: fv(p) = {q}
    assert not (sigma.dom_names() & an.fv(p))
    out = an.full_subst_vars(p, sigma)
    assert deneq_check(out, p, ws).equal
