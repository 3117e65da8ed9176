import numpy as np
import pytest

from qrhlkit import ast as A
from qrhlkit import expr as ex
from qrhlkit.linalg import psd_violation
from qrhlkit.parser import parse_expr, parse_program
from qrhlkit.semantics import (
    CqOperator,
    Evaluator,
    apply_denot,
    choi_block,
    deneq_check,
    denot_superop,
    einit,
    init_program,
    pr_after,
    restrict_superop,
)
from qrhlkit.types import BIT
from qrhlkit.workspace import BudgetExceeded, Workspace

from corpus import generated_programs, handwritten_programs


def P(ws, text):
    return parse_program(text, ws)


def bell_state():
    v = np.zeros(4)
    v[[0, 3]] = 1 / np.sqrt(2)
    return np.outer(v, v)


# -- eval_expr -----------------------------------------------------------------


def test_eval_const_and_var(ws):
    m = ws.mem_set(ws.default_memory(), (ws.var("x"),), 1)
    assert ex.eval_expr(ex.const(1, BIT), ws.env(m)) == 1
    assert ex.eval_expr(ex.var(ws.var("x")), ws.env(m)) == 1


def test_eval_conditional_operator_family(ws):
    # "H if x = 1" evaluates to H at x=1 and to the identity otherwise
    e = parse_expr("x == 1 ? H : I()", ws, expected=ex.TOp((BIT,)))
    m1 = ws.mem_set(ws.default_memory(), (ws.var("x"),), 1)
    m0 = ws.default_memory()
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(ex.eval_expr(e, ws.env(m1)), h)
    assert np.allclose(ex.eval_expr(e, ws.env(m0)), np.eye(2))


# -- apply_denot ----------------------------------------------------------------


def test_skip_is_identity(ws):
    rho = CqOperator.initial(ws)
    out, _ = apply_denot(A.Skip(), rho, ws)
    assert out.branches.keys() == rho.branches.keys()
    for k in rho.branches:
        assert np.allclose(out.branch(k), rho.branch(k))


def test_bell_preparation_oracle(ws):
    # independent oracle: dense 4x4 calculation of H then CNOT on |00><00|
    prog = P(ws, "q <q ket(0); r <q ket(0); on q apply H; on q, r apply CNOT")
    out, _ = apply_denot(prog, CqOperator.initial(ws), ws)
    mat = out.branch(ws.default_memory())
    assert np.allclose(mat, bell_state(), atol=1e-12)


def test_local_restores_classical_value(ws):
    prog = P(ws, "local x; { x <- 1 }")
    m0 = ws.default_memory()
    out, _ = apply_denot(prog, CqOperator.point(ws, m0), ws)
    assert list(out.branches) == [m0]


def test_local_quantum_value_restored(ws):
    # the caller-visible q is untouched by a local re-initialization
    prep = P(ws, "on q apply H")
    rho, _ = apply_denot(prep, CqOperator.initial(ws), ws)
    out, _ = apply_denot(P(ws, "local q; { q <q ket(1); on q apply H }"), rho, ws)
    assert np.allclose(out.branch(ws.default_memory()), rho.branch(ws.default_memory()), atol=1e-12)


def test_restrict_cases(ws):
    rho = CqOperator.initial(ws)
    top = restrict_superop(ex.true_(), ws)
    bot = restrict_superop(ex.false_(), ws)
    assert np.isclose(np.real(top(rho).trace()), 1.0)
    assert bot(rho).branches == {}
    two = CqOperator(ws)
    two.add_branch(ws.default_memory(), rho.branch(ws.default_memory()))
    two.add_branch(ws.mem_set(ws.default_memory(), (ws.var("x"),), 1), rho.branch(ws.default_memory()))
    keep = restrict_superop(parse_expr("x == 0", ws, ex.TBOOL), ws)(two)
    assert list(keep.branches) == [ws.default_memory()]


def test_einit_cases(ws):
    rho, _ = apply_denot(P(ws, "q <q ket(1); x <- 1"), CqOperator.initial(ws), ws)
    none = einit([], ws)(rho)
    assert np.allclose(none.branch(list(rho.branches)[0]), rho.branch(list(rho.branches)[0]))
    eq = einit([ws.var("q")], ws)
    out = eq(rho)
    mat = out.branch(ws.mem_set(ws.default_memory(), (ws.var("x"),), 1))
    expect, _ = apply_denot(P(ws, "x <- 1"), CqOperator.initial(ws), ws)
    assert np.allclose(mat, expect.branch(ws.mem_set(ws.default_memory(), (ws.var("x"),), 1)))
    # idempotence of state preparation
    out2 = eq(out)
    for k in out.branches:
        assert np.allclose(out2.branch(k), out.branch(k))
    # agrees with the init program on corpus states
    for prog_text in ("skip", "on q apply H", "x <$ uniform(bit)"):
        state, _ = apply_denot(P(ws, prog_text), CqOperator.initial(ws), ws)
        via_prog, _ = apply_denot(init_program([ws.var("q")]), state, ws)
        via_super = eq(state)
        keys = set(via_prog.branches) | set(via_super.branches)
        for k in keys:
            assert np.allclose(via_prog.branch(k), via_super.branch(k), atol=1e-12)


# -- deneq ------------------------------------------------------------------------


def test_deneq_local_idem_paper_case(ws):
    c = P(ws, "local x; { local x; { x <- 1 } }")
    d = P(ws, "local x; { x <- 1 }")
    assert deneq_check(c, d, ws).equal


def test_deneq_assign_overwrite(ws):
    assert deneq_check(P(ws, "x <- 0; x <- 1"), P(ws, "x <- 1"), ws).equal


def test_deneq_counterexample(ws):
    res = deneq_check(P(ws, "x <- 0"), P(ws, "x <- 1"), ws)
    assert not res.equal and res.counterexample is not None


# -- pr_after ---------------------------------------------------------------------


def test_pr_after_trivial(ws):
    rho = CqOperator.initial(ws)
    v, conv = pr_after(ex.true_(), A.Skip(), rho, ws)
    assert conv and np.isclose(v, np.real(rho.trace()))


def test_pr_after_uniform_sampling(ws):
    rho = CqOperator.initial(ws)
    v, conv = pr_after(parse_expr("x == 0", ws, ex.TBOOL), P(ws, "x <$ uniform(bit)"), rho, ws)
    assert conv and np.isclose(v, 0.5)


def test_pr_after_unchanged_by_trailing_qinit(ws):
    e = parse_expr("x == 0", ws, ex.TBOOL)
    c = P(ws, "on q apply H; x <m q with compmeas()")
    rho = CqOperator.initial(ws)
    v1, _ = pr_after(e, c, rho, ws)
    v2, _ = pr_after(e, A.seq([c, P(ws, "q <q ket(0)")]), rho, ws)
    assert np.isclose(v1, v2, atol=1e-12)


# -- while ------------------------------------------------------------------------


def test_while_terminating(ws):
    prog = P(ws, "x <- 1; while x == 1 { x <$ uniform(bit) }")
    out, diag = apply_denot(prog, CqOperator.initial(ws), ws)
    assert not diag.while_nonconvergence
    assert np.isclose(np.real(out.trace()), 1.0)
    assert list(out.branches) == [ws.mem_set(ws.default_memory(), (ws.var("x"),), 0)]


def test_while_nonconvergence_flagged(ws):
    prog = P(ws, "x <- 1; while x == 1 { skip }")
    out, diag = apply_denot(prog, CqOperator.initial(ws), ws, max_while_iters=50)
    assert diag.while_nonconvergence
    assert np.isclose(np.real(out.trace()), 0.0)


def test_while_partial_sums_monotone(ws):
    prog = P(ws, "while x == 1 { x <$ uniform(bit) }")
    rho = CqOperator.point(ws, ws.mem_set(ws.default_memory(), (ws.var("x"),), 1))
    traces = []
    for iters in (1, 2, 4, 8, 32):
        ev = Evaluator(ws, max_while_iters=iters)
        out = ev.run(prog, rho)
        traces.append(float(np.real(out.trace())))
    assert all(traces[i] <= traces[i + 1] + 1e-12 for i in range(len(traces) - 1))
    assert traces[-1] <= float(np.real(rho.trace())) + 1e-12


# -- structural invariants ----------------------------------------------------------


def test_trace_nonincreasing_and_cq_preserved(ws):
    progs = handwritten_programs(ws) + generated_programs(ws, count=25, seed=11)
    rho = CqOperator.initial(ws)
    for p in progs:
        out, diag = apply_denot(p, rho, ws)
        if diag.while_nonconvergence:
            continue
        assert np.real(out.trace()) <= np.real(rho.trace()) + 1e-9
        assert out.psd_violation() <= 1e-10
        has_loop = any(isinstance(s, A.While) for s in _walk(p))
        if not has_loop:
            assert np.isclose(np.real(out.trace()), np.real(rho.trace()), atol=1e-9)


def _walk(p):
    yield p
    for c in A.children(p):
        yield from _walk(c)


def test_choi_blocks_positive(ws):
    # complete positivity witnessed by Choi-matrix positivity on small programs
    progs = [
        P(ws, "on q apply H"),
        P(ws, "x <m q with compmeas()"),
        P(ws, "local q; { q <q ket(1) }"),
        P(ws, "x <$ uniform(bit)"),
    ]
    m0 = ws.default_memory()
    for p in progs:
        out, _ = apply_denot(p, CqOperator.point(ws, m0), ws)
        for m_out in out.branches:
            j = choi_block(p, ws, m0, m_out)
            assert psd_violation(j) <= 1e-9


def test_locality_lemma_einit_commutation(ws):
    # v not free in c: denotation commutes with state preparation on v
    c = P(ws, "x <- 1; on q apply H")
    prep = einit([ws.var("r")], ws)
    rho, _ = apply_denot(P(ws, "on r apply H; on q, r apply CNOT"), CqOperator.initial(ws), ws)
    a, _ = apply_denot(c, prep(rho), ws)
    b = prep(apply_denot(c, rho, ws)[0])
    keys = set(a.branches) | set(b.branches)
    for k in keys:
        assert np.allclose(a.branch(k), b.branch(k), atol=1e-10)


def test_commutation_lemma_disjoint_programs(ws):
    c = P(ws, "x <- 1; on q apply H")
    d = P(ws, "y <$ uniform(bit); on r apply X")
    assert deneq_check(A.seq([c, d]), A.seq([d, c]), ws).equal


def test_local_superop_linearity(ws):
    # finite family: LOCAL_v(E1) + LOCAL_v(E2) = LOCAL_v(E1 + E2) on corpus inputs
    v = ws.var("q")
    e1 = P(ws, "on q apply H; on q, r apply CNOT")
    e2 = P(ws, "q <q ket(1)")
    if_split = P(ws, "if x == 0 { on q apply H; on q, r apply CNOT } else { q <q ket(1) }")
    # the if-statement denotation is E1∘restrict + E2∘restrict; wrapping it in
    # local must equal the sum of the individually wrapped branches
    lhs = A.Local(v, if_split)
    rhs = P(ws, "if x == 0 { local q; { on q apply H; on q, r apply CNOT } } else { local q; { q <q ket(1) } }")
    assert deneq_check(lhs, rhs, ws).equal


def test_budget_enforced():
    from qrhlkit.types import CLASSICAL, QUANTUM, VarDecl

    decls = [VarDecl(f"q{chr(97 + i)}", QUANTUM, BIT) for i in range(13)]
    with pytest.raises(BudgetExceeded):
        Workspace(decls, budget=4096)


def test_non_state_rejected(ws):
    bad = CqOperator(ws, {ws.default_memory(): -np.eye(ws.qdim)})
    with pytest.raises(ValueError, match="positive"):
        bad.assert_state()


def test_superop_provenance(ws):
    s = denot_superop(P(ws, "x <- 1"), ws)
    assert "x <- 1" in s.provenance
