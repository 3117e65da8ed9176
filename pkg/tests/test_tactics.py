"""End-to-end tactic and proof-script tests."""

import numpy as np
import pytest

from qrhlkit import ast as A
from qrhlkit import expr as ex
from qrhlkit import predicates as P
from qrhlkit.kernel.goals import Judgment, ProbGoal, QrhlGoal
from qrhlkit.kernel.proof import ProofError, ProofSession
from qrhlkit.kernel.script import Engine, ScriptError, run_script, split_commands
from qrhlkit.kernel import tactics as T
from qrhlkit.parser import parse_expr, parse_pred, parse_program
from qrhlkit.semantics import CqOperator
from qrhlkit.types import BIT, CLASSICAL, QUANTUM, VarDecl
from qrhlkit.workspace import Workspace


def mk_ws():
    return Workspace(
        [
            VarDecl("x", CLASSICAL, BIT),
            VarDecl("y", CLASSICAL, BIT),
            VarDecl("q", QUANTUM, BIT),
            VarDecl("r", QUANTUM, BIT),
        ],
        aux="qaux",
    )


def sess_with(goal):
    ws = mk_ws()
    s = ProofSession(ws)
    s.begin("t", goal)
    return s


def test_assign_wp_chain():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("CL[x1 == 0]", ws)
    post = parse_pred("CL[x1 == 1 && y1 == 1]", ws)
    prog = parse_program("x <- 1; y <- x", ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), post)))
    T.t_assign1(s)
    T.t_assign1(s)
    s.qed()
    assert s.proved["t"] == 0


def test_sample_and_skip():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("top", ws)
    post = parse_pred("CL[x1 == 0] + CL[x1 == 1]", ws)
    prog = parse_program("x <$ uniform(bit)", ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), post)))
    T.t_sample1(s)
    s.qed()


def test_qinit_qapply_measure_chain():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("top", ws)
    post = parse_pred("CL[x1 == 0] + CL[x1 == 1]", ws)
    prog = parse_program("q <q ket(0); on q apply H; x <m q with compmeas()", ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), post)))
    T.t_measure1(s)
    T.t_qapply1(s)
    T.t_qinit1(s)
    s.qed()
    assert s.proved["t"] == 0


def test_if_and_case():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("top", ws)
    post = parse_pred("CL[y1 == 0] + CL[y1 == 1]", ws)
    prog = parse_program("if x == 0 { y <- 1 } else { y <- 0 }", ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), post)))
    T.t_if1(s)
    T.t_assign1(s)
    T.t_assign1(s)
    s.qed()


def test_while_tactic_with_numeric_totality():
    ws = mk_ws()
    s = ProofSession(ws)
    inv = parse_pred("CL[y1 == 0]", ws)
    prog = parse_program("while x == 1 { x <- 0 }", ws)
    post = parse_pred("CL[!(x1 == 1)] /\\ CL[y1 == 0]", ws)
    s.begin("t", QrhlGoal(Judgment(inv, prog, parse_program("skip", ws), post)))
    T.t_while1(s)
    # remaining: loop body goal {CL(e1) ∩ A} x<-0 ~ skip {A}; the totality
    # premise and the inclusion were discharged numerically
    assert len(s.goals) == 1
    T.t_assign1(s)
    s.qed()
    assert s.proved["t"] == 0
    assert any("totality" in line for line in s.cert)


def test_jointsample_closes_uniform_coupling():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("top", ws)
    post = parse_pred("CL[x1 == y2]", ws)
    c = parse_program("x <$ uniform(bit)", ws)
    d = parse_program("y <$ uniform(bit)", ws)
    s.begin("t", QrhlGoal(Judgment(pre, c, d, post)))
    from fractions import Fraction

    carrier = ex.TTuple((ex.TAtom(BIT), ex.TAtom(BIT)))
    witness = ex.dist_lit([((0, 0), Fraction(1, 2)), ((1, 1), Fraction(1, 2))], carrier)
    T.t_jointsample(s, witness)
    s.qed()
    assert s.proved["t"] == 0


def test_equal_infers_sets_and_reports_violations():
    ws = mk_ws()
    s = ProofSession(ws)
    c = parse_program("r <q ket(0); on q, r apply CNOT", ws)
    pre = parse_pred("qeq(q1, q2)", ws)
    post = parse_pred("qeq(q1 r1, q2 r2)", ws)
    s.begin("t", QrhlGoal(Judgment(pre, c, c, post)))
    T.t_equal(s)
    s.qed()


def test_equal_mismatch_produces_subgoals():
    ws = mk_ws()
    s = ProofSession(ws)
    left = parse_program("on q apply H; on q, r apply CNOT", ws)
    right = parse_program("on q apply X; on q, r apply CNOT", ws)
    pre = parse_pred("qeq(q1 r1, q2 r2)", ws)
    s.begin("t", QrhlGoal(Judgment(pre, left, right, pre)))
    T.t_equal(s)
    assert len(s.goals) == 1
    sub = s.goals[0]
    assert isinstance(sub, QrhlGoal)
    assert "on q apply H" in A.print_program_line(sub.j.left)
    assert "on q apply X" in A.print_program_line(sub.j.right)
    # the subgoal's equality ranges over Vmid (which includes the locals' pool)
    assert "qeq" in P.print_pred(sub.j.pre)


def test_equal_bad_vmid_reports_premise():
    ws = mk_ws()
    s = ProofSession(ws)
    c = parse_program("r <q ket(0); on q, r apply CNOT", ws)
    pre = parse_pred("qeq(q1, q2)", ws)
    post = parse_pred("qeq(q1 r1, q2 r2)", ws)
    s.begin("t", QrhlGoal(Judgment(pre, c, c, post)))
    from qrhlkit.kernel.rules import RuleError

    with pytest.raises(RuleError, match="Vout ⊆ Vmid"):
        T.t_equal(s, vmid=[ws.var("q")])


def test_byqrhl_default_sets():
    ws = mk_ws()
    s = ProofSession(ws)
    e = parse_expr("x == 0", ws, ex.TBOOL)
    c = parse_program("x <$ uniform(bit)", ws)
    rho = CqOperator.initial(ws)
    s.begin("t", ProbGoal(e, c, rho, e, c, rho, "="))
    T.t_byqrhl(s)
    assert len(s.goals) == 1
    j = s.goals[0].j
    assert "CL[(x1 == x2)]" in P.print_pred(j.pre)


def test_local_remove_weak_and_strong():
    ws = mk_ws()
    pre = parse_pred("top", ws)
    prog = parse_program("local q; { q <q ket(1) }", ws)
    s = ProofSession(ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), pre)))
    T.t_local_remove(s, 1)  # default drops the init conjunct
    j = s.goals[0].j
    assert P.pred_equal(j.pre, pre)
    s2 = ProofSession(ws)
    s2.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), pre)))
    T.t_local_remove(s2, 1, include_init=True)
    assert "instate" in P.print_pred(s2.goals[0].j.pre)


def test_local_up_tactic_rewrites_with_deneq():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("top", ws)
    prog = parse_program("{ local y; { x <- 1 } }; { local y; { y <- 0 } }", ws)
    s.begin("t", QrhlGoal(Judgment(pre, prog, parse_program("skip", ws), pre)))
    T.t_local_up(s, 1)
    j = s.goals[0].j
    assert isinstance(j.left, A.Local)
    assert any("deneq" in line for line in s.cert)


def test_conseq_qrhl_tactic():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("qeq(q1, q2)", ws)
    c = parse_program("x <- 1", ws)
    s.begin("t", QrhlGoal(Judgment(pre, c, c, pre)))
    T.t_conseq_qrhl(s, [ws.var("q")], [ws.var("r")])
    j = s.goals[0].j
    assert "qeq(r1, r2)" in P.print_pred(j.pre)


def test_frame_tactic():
    ws = mk_ws()
    s = ProofSession(ws)
    frame = parse_pred("CL[y1 == y2]", ws)
    pre = parse_pred("CL[x1 == 0] /\\ CL[y1 == y2]", ws)
    post = parse_pred("CL[x1 == 1] /\\ CL[y1 == y2]", ws)
    s.begin("t", QrhlGoal(Judgment(pre, parse_program("x <- 1", ws), parse_program("skip", ws), post)))
    T.t_frame(s, frame)
    assert "y1" not in P.print_pred(s.goals[0].j.pre)


def test_sym_tactic_roundtrip():
    ws = mk_ws()
    s = ProofSession(ws)
    pre = parse_pred("CL[x1 == 0]", ws)
    c = parse_program("x <- 1", ws)
    s.begin("t", QrhlGoal(Judgment(pre, c, parse_program("skip", ws), parse_pred("top", ws))))
    T.t_sym(s)
    j = s.goals[0].j
    assert "x2" in P.print_pred(j.pre)
    assert A.program_equal(j.right, c)


# ---------------------------------------------------------------------------
# Script engine


PROB_SCRIPT = """\
var classical x : bit.
var quantum q : bit.
var quantum qaux : aux_infinite.
prob p : Pr[ x == 0 : { x <$ uniform(bit) } ] == Pr[ x == 0 : { x <$ uniform(bit) } ] on default.
byqrhl.
jointsample { dist{(0, 0): 1/2, (1, 1): 1/2} }.
qed.
"""


def test_prob_script_with_jointsample():
    eng, results = run_script(PROB_SCRIPT)
    errs = [r.text for r in results if r.kind == "error"]
    assert not errs, errs
    assert eng.summary() == {"lemmas": {"p": 0}, "open": None, "admitted_total": 0}


def test_split_commands_handles_floats_and_braces():
    cmds = split_commands("program c := { q <q vec[0.5, 0.5, 0.5, 0.5] }. skip-ish.")
    assert len(cmds) == 2
    with pytest.raises(ScriptError, match="terminated"):
        split_commands("var classical x : bit")


def test_engine_undo_restores_goals():
    eng = Engine()
    for cmd in [
        "var quantum q : bit",
        "var quantum r : bit",
        "var quantum qaux : aux_infinite",
        "qrhl t : { qeq(q1 r1, q2 r2) } { r <q ket(0) } ~ { r <q ket(0) } { qeq(q1, q2) }",
    ]:
        assert eng.execute(cmd).kind != "error"
    before = eng.execute("goals").text
    assert eng.execute("jointqiniteq0").kind != "error"
    assert eng.execute("goals").text == "no goals"
    assert eng.execute("undo").kind == "state"  # undoes the goals query
    assert eng.execute("undo").kind == "state"  # undoes the tactic
    assert eng.execute("goals").text == before


def test_engine_error_preserves_session():
    eng = Engine()
    eng.execute("var classical x : bit")
    res = eng.execute("qrhl t : { top } { z <- 1 } ~ { skip } { top }")
    assert res.kind == "error"
    # session is intact: we can still declare and prove
    assert eng.execute("qrhl t : { top } { x <- 1 } ~ { x <- 1 } { top }").kind == "state"


def test_engine_varsets_and_predeval():
    eng = Engine()
    for cmd in ["var classical x : bit", "var quantum q : bit"]:
        eng.execute(cmd)
    res = eng.execute("varsets { local x; { x <- 1; q <q ket(0) } }")
    assert res.kind == "varsets"
    assert "fv: {q}" in res.text
    res2 = eng.execute("predeval { qeq(q1, q2) }")
    assert res2.kind == "predeval"
    assert "dim 3 of 4" in res2.text


def test_engine_event_source_replay():
    eng, _ = run_script(PROB_SCRIPT)
    replay = Engine()
    for request, _, _ in eng.log:
        replay.execute(request)
    assert replay.certificate_text() == eng.certificate_text()
    assert replay.summary() == eng.summary()


def test_admit_counts():
    eng = Engine()
    for cmd in [
        "var classical x : bit",
        "qrhl t : { top } { x <- 1 } ~ { skip } { CL[x1 == 1] }",
        "admit",
        "qed",
    ]:
        res = eng.execute(cmd)
        assert res.kind != "error", res.text
    assert eng.summary()["admitted_total"] == 1
