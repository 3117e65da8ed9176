import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrhlkit import expr as ex
from qrhlkit import predicates as P
from qrhlkit.linalg import Subspace
from qrhlkit.parser import parse_pred
from qrhlkit.semantics import CqOperator, apply_denot
from qrhlkit.types import BIT, QUANTUM, VarDecl
from qrhlkit.workspace import DoubledWorkspace, Workspace


def ev(ws, text, mems=None):
    dws = DoubledWorkspace(ws)
    pred = parse_pred(text, ws)
    if mems is None:
        mems = (ws.default_memory(), ws.default_memory())
    return P.eval_pred(pred, mems, dws)


@pytest.fixture(scope="module")
def wq():
    return Workspace([VarDecl("q", QUANTUM, BIT)])


@pytest.fixture(scope="module")
def wqr():
    return Workspace([VarDecl("q", QUANTUM, BIT), VarDecl("r", QUANTUM, BIT)])


# -- basic evaluation -----------------------------------------------------------


def test_cl_false_is_zero_space(ws):
    s = ev(ws, "CL[false]")
    assert s.dim == 0


def test_cl_true_is_top(ws):
    s = ev(ws, "CL[true]")
    assert s.dim == s.ambient


def test_cl_reads_indexed_memories(ws):
    dws = DoubledWorkspace(ws)
    pred = parse_pred("CL[x1 == x2]", ws)
    m0 = ws.default_memory()
    m1 = ws.mem_set(m0, (ws.var("x"),), 1)
    assert P.eval_pred(pred, (m0, m0), dws).dim == dws.qdim
    assert P.eval_pred(pred, (m0, m1), dws).dim == 0


def test_inter_with_top(wq):
    a = ev(wq, "qeq(q1, q2) /\\ top")
    b = ev(wq, "qeq(q1, q2)")
    assert a.equals(b)


def test_quanteq_dim_is_symmetric_subspace(wq):
    # +1 eigenspace of the 4x4 swap is the 3-dimensional symmetric subspace
    s = ev(wq, "qeq(q1, q2)")
    assert s.dim == 3
    from qrhlkit.linalg import fixed_space, swap_operator

    swap = swap_operator((2, 2), [0], [1])
    assert s.equals(fixed_space(swap))


def test_psi_tensor_psi_membership(wq):
    s = ev(wq, "qeq(q1, q2)")
    rng = np.random.default_rng(5)
    for _ in range(6):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        assert s.contains_vec(np.kron(v, v))


def test_quanteq_inclusion_and_strictness(wqr):
    both = ev(wqr, "qeq(q1, q2) /\\ qeq(r1, r2)")
    joint = ev(wqr, "qeq(q1 r1, q2 r2)")
    assert both.leq(joint)
    assert not joint.leq(both)


def test_extended_quanteq_membership(wqr):
    s = ev(wqr, "qeq(id : q1 r1, CNOT : q2 r2)")
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    bell = np.zeros(4, dtype=complex)
    bell[[0, 3]] = 1 / np.sqrt(2)
    assert s.contains_vec(np.kron(bell, cnot.conj().T @ bell))


def test_extended_quanteq_identity_case(wq):
    plain = ev(wq, "qeq(q1, q2)")
    explicit = ev(wq, "qeq(op[1, 0; 0, 1] : q1, op[1, 0; 0, 1] : q2)")
    assert plain.equals(explicit)


def test_quanteq_rejects_type_mismatch(wqr):
    with pytest.raises(ex.TypeError_):
        parse_pred("qeq(q1, q2 r2)", wqr)


def test_quanteq_space_rejects_nonunitary(wqr):
    dws = DoubledWorkspace(wqr)
    q, r = wqr.var("q"), wqr.var("r")
    bad = np.array([[1, 0], [0, 0]], dtype=complex)
    with pytest.raises(ValueError, match="unitary"):
        P.quanteq_space(dws, (P.QVar(q, 1),), (P.QVar(q, 2),), bad, None)


# -- subspace algebra --------------------------------------------------------------


def _random_subspace(rng, dim, rank):
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return Subspace.span([m[:, i] for i in range(rank)], dim)


def test_ortho_involution_and_lattice_ops():
    rng = np.random.default_rng(42)
    for _ in range(10):
        a = _random_subspace(rng, 8, rng.integers(0, 5))
        b = _random_subspace(rng, 8, rng.integers(0, 5))
        assert a.ortho().ortho().equals(a)
        assert a.inter(b).equals(b.inter(a))
        assert a.sum(b).equals(b.sum(a))
        assert a.inter(a).equals(a)
        assert a.sum(a).equals(a)
        assert a.inter(b).leq(a)
        assert a.leq(a.sum(b))


def test_inter_assoc():
    rng = np.random.default_rng(1)
    a, b, c = (_random_subspace(rng, 6, k) for k in (3, 4, 5))
    assert a.inter(b).inter(c).equals(a.inter(b.inter(c)))


def test_zero_below_everything():
    z = Subspace.bottom(4)
    t = Subspace.top(4)
    assert z.leq(t) and z.leq(z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 1000))
def test_subspace_leq_transitive(ra, rb, seed):
    rng = np.random.default_rng(seed)
    a = _random_subspace(rng, 5, ra)
    b = a.sum(_random_subspace(rng, 5, rb))
    c = b.sum(_random_subspace(rng, 5, 1))
    assert a.leq(b) and b.leq(c) and a.leq(c)


# -- satisfies ---------------------------------------------------------------------


def test_satisfies_pure_state(wq):
    dws = DoubledWorkspace(wq)
    pred = parse_pred("instate(q1, ket(0))", wq)
    rho = CqOperator(dws, {(): np.diag([1.0, 0, 0, 0]).astype(complex)})  # |00><00| over (q1,q2)
    assert P.satisfies(rho, pred, dws)
    mix = CqOperator(dws, {(): np.eye(4, dtype=complex) / 4})
    assert not P.satisfies(mix, pred, dws)


def test_satisfies_quanteq_product(wq):
    dws = DoubledWorkspace(wq)
    pred = parse_pred("qeq(q1, q2)", wq)
    v = np.array([0.6, 0.8j])
    vv = np.kron(v, v)
    rho = CqOperator(dws, {(): np.outer(vv, vv.conj())})
    assert P.satisfies(rho, pred, dws)


def test_satisfies_monotone(wq):
    dws = DoubledWorkspace(wq)
    small = parse_pred("instate(q1, ket(0))", wq)
    rho = CqOperator(dws, {(): np.diag([1.0, 0, 0, 0]).astype(complex)})
    assert P.satisfies(rho, small, dws)
    assert P.satisfies(rho, P.PTop(), dws)


# -- spaceat ------------------------------------------------------------------------


def test_spaceat_top(wq):
    s = ev(wq, "spaceat(top, ket(0), q1)")
    assert s.dim == s.ambient


def test_spaceat_matching_state(wq):
    s = ev(wq, "spaceat(instate(q1, ket(0)), ket(0), q1)")
    assert s.dim == s.ambient


def test_spaceat_orthogonal_state(wq):
    s = ev(wq, "spaceat(instate(q1, ket(1)), ket(0), q1)")
    assert s.dim == 0


# -- the register-joining inclusion used by the two-sided rules ----------------------


def test_init_states_inside_quanteq(wq):
    a = ev(wq, "instate(q1, ket(0)) /\\ instate(q2, ket(0))")
    b = ev(wq, "qeq(q1, q2)")
    assert a.leq(b)


def test_print_parse_roundtrip(ws):
    texts = [
        "top",
        "bot",
        "CL[(x1 == x2)]",
        "qeq(q1, q2)",
        "qeq(q1 r1, q2 r2) /\\ CL[(x1 == 0)]",
        "orth(qeq(q1, q2)) + instate(q1, ket(1))",
        "lift(H, q1)",
        "img(H, q1, top)",
        "imgadj(H, q1, qeq(q1, q2))",
        "spaceat(top, ket(0), q1)",
        "eqvars(x, q)",
    ]
    for t in texts:
        p1 = parse_pred(t, ws)
        p2 = parse_pred(P.print_pred(p1), ws)
        assert P.pred_equal(p1, p2), t


def test_eqvars_desugaring(ws):
    p = parse_pred("eqvars(x, q)", ws)
    manual = parse_pred("qeq(q1, q2) /\\ CL[x1 == x2]", ws)
    assert P.pred_equal(p, manual)
