import pytest

from qrhlkit import ast as A
from qrhlkit import expr as ex
from qrhlkit.parser import ParseError, parse_program
from qrhlkit.types import BIT, CLASSICAL, QUANTUM, FiniteType, VarDecl
from qrhlkit.workspace import Workspace

from corpus import generated_programs, handwritten_programs


def test_skip_is_identity_case(ws):
    p = parse_program("skip;", ws)
    assert isinstance(p, A.Skip)


def test_paper_intro_program_shape(ws):
    p = parse_program("local r; { r <q ket(0); on q, r apply CNOT }", ws)
    assert isinstance(p, A.Local) and p.v.name == "r"
    body = A.flatten(p.body)
    assert isinstance(body[0], A.QInit) and isinstance(body[1], A.QApply)
    assert [q.name for q in body[1].qs] == ["q", "r"]


def test_sample_nominal_type_error(ws3):
    # distribution over bit is not a subset of the distributions on trit
    with pytest.raises(ParseError, match="dist"):
        parse_program("t <$ uniform(bit)", ws3)


def test_undeclared_variable(ws):
    with pytest.raises(ParseError, match="undeclared"):
        parse_program("z <- 1", ws)


def test_hole_not_a_program(ws):
    ctx = parse_program("local x; { @1 }", ws)
    assert not A.is_program(ctx)
    assert A.hole_indices(ctx) == frozenset({1})


def test_well_typed_checker_accepts_qinit(ws):
    p = parse_program("q <q ket(0)", ws)
    assert A.check_well_typed(p) == []


def test_well_typed_checker_rejects_bad_assign(ws3):
    # constructed directly: assignment of a trit expression to a bit variable
    t = ws3.var("t")
    x = ws3.var("x")
    bad = A.Assign((x,), ex.var(t))
    violations = A.check_well_typed(bad)
    assert violations and violations[0].rule == "assign"


def test_local_always_well_typed_when_body_is(ws):
    p = A.Local(ws.var("x"), A.Skip())
    assert A.check_well_typed(p) == []


def test_instantiate_no_capture_avoidance(ws):
    # (local v @1)[v := 1] = local v (v := 1): the plugged occurrence is captured
    ctx = parse_program("local x; { @1 }", ws)
    body = parse_program("x <- 1", ws)
    inst = A.instantiate(ctx, {1: body})
    expected = parse_program("local x; { x <- 1 }", ws)
    assert A.program_equal(inst, expected)
    from qrhlkit.analysis import fv

    assert fv(inst) == frozenset()  # x is captured


def test_instantiate_trivial_hole(ws):
    assert A.program_equal(A.instantiate(A.Hole(1), {1: A.Skip()}), A.Skip())


def test_instantiate_same_program_in_every_hole(ws):
    ctx = A.seq([A.Hole(1), A.Hole(1)])
    body = parse_program("x <- 1", ws)
    inst = A.instantiate(ctx, {1: body})
    assert A.program_equal(inst, A.seq([body, body]))


def test_instantiate_missing_hole(ws):
    with pytest.raises(ValueError, match="hole"):
        A.instantiate(A.Hole(2), {1: A.Skip()})


def test_instantiate_preserves_well_typedness(ws):
    ctx = parse_program("local q; { @1; on q apply H }", ws)
    body = parse_program("q <q ket(1)", ws)
    inst = A.instantiate(ctx, {1: body})
    assert A.check_well_typed(inst) == []


def test_roundtrip_handwritten(ws):
    for p in handwritten_programs(ws):
        text = A.print_program(p)
        again = parse_program(text, ws)
        assert A.program_equal(p, again), text


def test_roundtrip_generated(ws):
    for p in generated_programs(ws, count=120, seed=7):
        text = A.print_program(p)
        again = parse_program(text, ws)
        assert A.program_equal(p, again), text


def test_local_binds_weaker_than_seq(ws):
    p = parse_program("local x; x <- 1; y <- x", ws)
    assert isinstance(p, A.Local)
    assert len(A.flatten(p.body)) == 2


def test_vec_literal_norm_enforced(ws):
    with pytest.raises(ParseError):
        parse_program("q <q vec[1, 1]", ws)


def test_op_literal_isometry_enforced(ws):
    with pytest.raises(ParseError):
        parse_program("on q apply op[1, 0; 0, 2]", ws)


def test_variable_names_must_not_end_in_digit():
    with pytest.raises(ValueError, match="digit"):
        VarDecl("x1", CLASSICAL, BIT)


def test_finite_type_invariants():
    with pytest.raises(ValueError):
        FiniteType("empty", ())
    with pytest.raises(ValueError):
        FiniteType("dup", (0, 0))
