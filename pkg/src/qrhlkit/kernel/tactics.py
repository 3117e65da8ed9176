"""Tactics: convenience layers that expand into kernel rule applications.

A tactic never closes a goal by itself; it only calls ProofSession.apply
(kernel rules), relying on Conseq + numeric inclusion discharge to bridge
predicate shapes, and on program-replacement rules backed by denotational
equivalence for rewriting.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .. import analysis as an
from .. import ast as A
from .. import expr as ex
from .. import predicates as P
from .. import rewrite as RW
from ..analysis import Substitution
from ..ast import Program
from ..expr import Expr
from ..predicates import PredExpr, QVar
from ..types import VarDecl
from .goals import Judgment, ProbGoal, QrhlGoal
from .proof import ProofError, ProofSession
from .rules import (
    RuleError,
    cl_eq_pred,
    conjuncts,
    measure_pre,
    pred_matches,
    qapply_pre,
    qinit_pre,
    quanteq_both_sides,
    sample_pre,
    subst_assign,
)


def _qrhl_goal(sess: ProofSession) -> Judgment:
    g = sess.goal(0)
    if not isinstance(g, QrhlGoal):
        raise ProofError("tactic needs a relational judgment goal")
    return g.j


def _prob_goal(sess: ProofSession) -> ProbGoal:
    g = sess.goal(0)
    if not isinstance(g, ProbGoal):
        raise ProofError("tactic needs a probability goal")
    return g


# ---------------------------------------------------------------------------
# Structural tactics


def t_seq(sess: ProofSession, i: int, k: int, cut: PredExpr) -> None:
    sess.apply("Seq", i=i, k=k, cut=cut)


def t_sym(sess: ProofSession) -> None:
    sess.apply("Sym")


def t_case(sess: ProofSession, e: Expr) -> None:
    sess.apply("Case", e=e)


def t_conseq(sess: ProofSession, pre: Optional[PredExpr] = None, post: Optional[PredExpr] = None) -> None:
    j = _qrhl_goal(sess)
    sess.apply("Conseq", pre=pre if pre is not None else j.pre, post=post if post is not None else j.post)


def t_skip(sess: ProofSession) -> None:
    j = _qrhl_goal(sess)
    if pred_matches(j.pre, j.post):
        sess.apply("Skip")
        return
    sess.apply("Conseq", pre=j.pre, post=j.pre)
    sess.apply("Skip")


def t_frame(sess: ProofSession, frame: PredExpr) -> None:
    j = _qrhl_goal(sess)
    fcs = conjuncts(frame)

    def strip(p: PredExpr, which: str) -> PredExpr:
        cs = list(conjuncts(p))
        for f in fcs:
            for i, c in enumerate(cs):
                if P.pred_equal(c, f):
                    del cs[i]
                    break
            else:
                raise ProofError(f"frame conjunct not found in the {which}")
        return P.inter(cs)

    sess.apply("Frame", pre=strip(j.pre, "precondition"), post=strip(j.post, "postcondition"), frame=frame)


# ---------------------------------------------------------------------------
# Per-statement weakest-precondition tactics


def _wp_step(sess: ProofSession, side: int, stmt_kind, rule: str, wp_fn) -> None:
    j = _qrhl_goal(sess)
    own = j.left if side == 1 else j.right
    other = j.right if side == 1 else j.left
    stmts = A.flatten(own)
    if not stmts or not isinstance(stmts[-1], stmt_kind):
        raise ProofError(f"{rule}: last statement on side {side} must be {stmt_kind.__name__}")
    last = stmts[-1]
    wp = wp_fn(j.post, last, side)
    n_other = len(A.flatten(other))
    if len(stmts) == 1 and n_other == 0:
        if pred_matches(j.pre, wp):
            sess.apply(rule)
            return
        sess.apply("Conseq", pre=wp, post=j.post)
        sess.apply(rule)
        return
    if side == 1:
        sess.apply("Seq", i=len(stmts) - 1, k=n_other, cut=wp)
    else:
        sess.apply("Seq", i=n_other, k=len(stmts) - 1, cut=wp)
    sess.apply(rule, at=1)


def t_assign1(sess):
    _wp_step(sess, 1, A.Assign, "Assign1", lambda post, st, side: subst_assign(post, st.xs, st.e, side))


def t_assign2(sess):
    _wp_step(sess, 2, A.Assign, "Assign2", lambda post, st, side: subst_assign(post, st.xs, st.e, side))


def t_sample1(sess):
    _wp_step(sess, 1, A.Sample, "Sample1", sample_pre)


def t_sample2(sess):
    _wp_step(sess, 2, A.Sample, "Sample2", sample_pre)


def t_qinit1(sess):
    _wp_step(sess, 1, A.QInit, "QInit1", qinit_pre)


def t_qinit2(sess):
    _wp_step(sess, 2, A.QInit, "QInit2", qinit_pre)


def t_qapply1(sess):
    _wp_step(sess, 1, A.QApply, "QApply1", qapply_pre)


def t_qapply2(sess):
    _wp_step(sess, 2, A.QApply, "QApply2", qapply_pre)


def t_measure1(sess):
    _wp_step(sess, 1, A.Measure, "Measure1", measure_pre)


def t_measure2(sess):
    _wp_step(sess, 2, A.Measure, "Measure2", measure_pre)


def t_if1(sess):
    sess.apply("If1")


def t_if2(sess):
    sess.apply("If2")


def t_jointif(sess):
    sess.apply("JointIf")


def _while_shape(sess: ProofSession, side: int):
    j = _qrhl_goal(sess)
    own = j.left if side == 1 else j.right
    stmts = A.flatten(own)
    if len(stmts) != 1 or not isinstance(stmts[0], A.While):
        raise ProofError("the loop tactics need a single while-statement on the stepped side")
    return j, stmts[0]


def t_while1(sess, total_on: Optional[PredExpr] = None):
    j, st = _while_shape(sess, 1)
    want_post = P.inter([P.PCL(ex.not_(ex.index_expr(st.e, 1))), j.pre])
    if not pred_matches(j.post, want_post):
        sess.apply("Conseq", pre=j.pre, post=want_post)
    sess.apply("While1", total_on=total_on)


def t_while2(sess, total_on: Optional[PredExpr] = None):
    j, st = _while_shape(sess, 2)
    want_post = P.inter([P.PCL(ex.not_(ex.index_expr(st.e, 2))), j.pre])
    if not pred_matches(j.post, want_post):
        sess.apply("Conseq", pre=j.pre, post=want_post)
    sess.apply("While2", total_on=total_on)


def t_jointwhile(sess):
    j = _qrhl_goal(sess)
    st1 = A.flatten(j.left)
    st2 = A.flatten(j.right)
    if len(st1) != 1 or len(st2) != 1 or not isinstance(st1[0], A.While) or not isinstance(st2[0], A.While):
        raise ProofError("jointwhile needs single while-statements on both sides")
    e1 = ex.index_expr(st1[0].e, 1)
    e2 = ex.index_expr(st2[0].e, 2)
    want_post = P.inter([P.PCL(ex.and_(ex.not_(e1), ex.not_(e2))), j.pre])
    if not pred_matches(j.post, want_post):
        sess.apply("Conseq", pre=j.pre, post=want_post)
    sess.apply("JointWhile")


def _joint_last(sess: ProofSession, kind, name: str):
    j = _qrhl_goal(sess)
    st1 = A.flatten(j.left)
    st2 = A.flatten(j.right)
    if not st1 or not st2 or not isinstance(st1[-1], kind) or not isinstance(st2[-1], kind):
        raise ProofError(f"{name} needs {kind.__name__} statements at the end of both sides")
    return j, st1, st2


def t_jointsample(sess, witness: Expr):
    from .rules import joint_sample_pre

    j, st1, st2 = _joint_last(sess, A.Sample, "jointsample")
    wp = joint_sample_pre(j.post, st1[-1], st2[-1], witness)
    if len(st1) > 1 or len(st2) > 1:
        sess.apply("Seq", i=len(st1) - 1, k=len(st2) - 1, cut=wp)
        sess.apply("JointSample", at=1, witness=witness)
        return
    if not pred_matches(j.pre, wp):
        sess.apply("Conseq", pre=wp, post=j.post)
    sess.apply("JointSample", witness=witness)


def t_jointmeasure(sess):
    from .rules import joint_measure_pre

    j, st1, st2 = _joint_last(sess, A.Measure, "jointmeasure")
    wp = joint_measure_pre(j.post, st1[-1], st2[-1])
    if len(st1) > 1 or len(st2) > 1:
        sess.apply("Seq", i=len(st1) - 1, k=len(st2) - 1, cut=wp)
        sess.apply("JointMeasureSimple", at=1)
        return
    if not pred_matches(j.pre, wp):
        sess.apply("Conseq", pre=wp, post=j.post)
    sess.apply("JointMeasureSimple")


# ---------------------------------------------------------------------------
# Renaming / locals


def t_rename(sess: ProofSession, side: int, pairs) -> None:
    ws = sess.ws
    sigma = Substitution({ws.var(a): ws.var(b) for a, b in pairs})
    sess.apply(f"RenameQrhl{side}", sigma=sigma)


def t_local_remove(sess: ProofSession, side: int, include_init: bool = False) -> None:
    """Strip the top local declarations on one side.

    The default drops the initial-state conjunct (the weaker but more
    convenient form); pass include_init=True for the full-strength rule.
    """
    sess.apply(f"RemoveLocal{side}", include_init=include_init)


def t_local_up(sess: ProofSession, side: Optional[int] = None) -> None:
    """Move local declarations upwards (greedy, to fixpoint) on one/both sides."""
    j = _qrhl_goal(sess)
    sides = [side] if side in (1, 2) else [1, 2]
    for s in sides:
        prog = j.left if s == 1 else j.right
        new = RW.local_up_everywhere(prog)
        if not A.program_equal(new, prog):
            sess.apply("RewriteLeft" if s == 1 else "RewriteRight", new=new)
        j = _qrhl_goal(sess)


def t_jointqiniteq0(sess: ProofSession) -> None:
    """Two-sided initialization: wraps JointQInitEq0 in Conseq.

    The target shapes are reconstructed from the goal's postcondition, so the
    only residue is a pair of numeric inclusion goals.
    """
    j = _qrhl_goal(sess)
    st1 = A.flatten(j.left)
    st2 = A.flatten(j.right)
    if len(st1) != 1 or len(st2) != 1 or not isinstance(st1[0], A.QInit) or not isinstance(st2[0], A.QInit):
        raise ProofError("jointqiniteq0: both programs must be single quantum initializations")
    cs = conjuncts(j.post)
    eqs = [c for c in cs if isinstance(c, P.PQuantEq)]
    if len(eqs) != 1:
        raise ProofError("jointqiniteq0: postcondition must contain exactly one quantum equality")
    rest = [c for c in cs if c is not eqs[0]]
    q1 = tuple(QVar(q, 1) for q in st1[0].qs)
    q2 = tuple(QVar(q, 2) for q in st2[0].qs)
    want_pre = P.inter(rest + [P.quanteq(eqs[0].X + q1, eqs[0].Y + q2)])
    want_post = P.inter(rest + [eqs[0]])
    sess.apply("Conseq", pre=want_pre, post=want_post)
    sess.apply("JointQInitEq0")


# ---------------------------------------------------------------------------
# byqrhl: from probabilities to relational judgments


def t_byqrhl(
    sess: ProofSession,
    X: Optional[Sequence[VarDecl]] = None,
    Q: Optional[Sequence[VarDecl]] = None,
    assuming: Optional[PredExpr] = None,
) -> None:
    g = _prob_goal(sess)
    ws = sess.ws
    pre = assuming if assuming is not None else P.PTop()
    if X is None or Q is None:
        names = an.fv(g.c) | an.fv(g.d) | P.fv_pred_base(pre)
        decls = [ws.var(n) for n in names if ws.has(n)]
        decls.sort(key=lambda d: ws.decls.index(d))
        if X is None:
            X = [d for d in decls if d.is_classical]
        if Q is None:
            Q = [d for d in decls if d.is_quantum]
    sess.apply("QrhlElimEqNew", X=list(X), Q=list(Q), pre=pre)


# ---------------------------------------------------------------------------
# equal: the adversary rule with best-effort set inference


def common_context(c: Program, d: Program):
    """Largest shared context of two programs; mismatches become holes."""
    subs: list = []
    subsp: list = []

    def go(a: Program, b: Program) -> Program:
        if A.program_equal(a, b):
            return a
        if isinstance(a, A.Seq) or isinstance(b, A.Seq):
            sa, sb = A.flatten(a), A.flatten(b)
            if len(sa) == len(sb) and len(sa) > 1:
                return A.seq([go(x, y) for x, y in zip(sa, sb)])
            return hole(a, b)
        if isinstance(a, A.If) and isinstance(b, A.If) and ex.expr_equal(a.e, b.e):
            return A.If(a.e, go(a.then, b.then), go(a.other, b.other))
        if isinstance(a, A.While) and isinstance(b, A.While) and ex.expr_equal(a.e, b.e):
            return A.While(a.e, go(a.body, b.body))
        if isinstance(a, A.Local) and isinstance(b, A.Local) and a.v == b.v:
            return A.Local(a.v, go(a.body, b.body))
        return hole(a, b)

    def hole(a: Program, b: Program) -> Program:
        subs.append(a)
        subsp.append(b)
        return A.Hole(len(subs))

    ctx = go(c, d)
    return ctx, subs, subsp


def _split_eqv(p: PredExpr, ws):
    """(rest conjuncts, ordered variable list) of an R ∩ ≡V shaped predicate."""
    qu_order: list = []
    cl_order: list = []
    rest: list = []
    seen_eq = False
    seen_cl = False
    for c in conjuncts(p):
        if isinstance(c, P.PQuantEq) and not seen_eq and c.opA is None and c.opB is None:
            if tuple(q.idx for q in c.X) == tuple(1 for _ in c.X) and tuple(q.idx for q in c.Y) == tuple(
                2 for _ in c.Y
            ) and tuple(q.var for q in c.X) == tuple(q.var for q in c.Y):
                qu_order = [q.var for q in c.X]
                seen_eq = True
                continue
        if isinstance(c, P.PCL) and not seen_cl:
            names = _pure_eq_names(c.e, ws)
            if names is not None:
                cl_order = names
                seen_cl = True
                continue
        rest.append(c)
    return rest, qu_order + cl_order


def _pure_eq_names(e: Expr, ws):
    """VarDecl list when e is a conjunction of x1 == x2 equalities, else None."""
    if isinstance(e, ex.AndE):
        a = _pure_eq_names(e.a, ws)
        b = _pure_eq_names(e.b, ws)
        if a is None or b is None:
            return None
        return a + b
    if isinstance(e, ex.EqE) and isinstance(e.a, ex.VarRef) and isinstance(e.b, ex.VarRef):
        if e.a.var == e.b.var and e.a.idx == 1 and e.b.idx == 2:
            return [e.a.var]
    return None


def infer_vmid(ws, ctx_prog: Program, s, sp, vout, extra=()) -> list:
    """Minimal Vmid: fv C ∪ inner C ∪ Vout (+ user-ordered extras); aux is implicit."""
    ordered: list = []
    for d in extra:
        if d not in ordered:
            ordered.append(d)
    names = an.fv(ctx_prog) | an.inner(ctx_prog)
    pool = [d for d in vout] + [ws.var(n) for n in sorted(names) if ws.has(n)]
    pool.sort(key=lambda d: ws.decls.index(d))
    for d in pool:
        if d not in ordered:
            ordered.append(d)
    return ordered


def t_equal(
    sess: ProofSession,
    vmid: Optional[Sequence[VarDecl]] = None,
    vin: Optional[Sequence[VarDecl]] = None,
    vout: Optional[Sequence[VarDecl]] = None,
) -> None:
    """Apply the adversary rule to structurally-mostly-equal programs.

    Vin/Vout default to the variable lists read off the goal's pre/post
    equalities; Vmid defaults to the minimal set satisfying the lower-bound
    premises.  An unsatisfiable premise is reported by name.
    """
    j = _qrhl_goal(sess)
    ws = sess.ws
    ctx_prog, s, sp = common_context(j.left, j.right)
    rest_pre, vin_goal = _split_eqv(j.pre, ws)
    rest_post, vout_goal = _split_eqv(j.post, ws)
    if vin is None:
        vin = vin_goal
    if vout is None:
        vout = vout_goal
    if not _same_multiset(rest_pre, rest_post):
        raise ProofError("equal: pre and post must share the same rest-predicate R")
    R = P.inter(rest_pre)
    if vmid is None:
        vmid = infer_vmid(ws, ctx_prog, s, sp, vout)
    else:
        vmid = list(vmid)  # user-specified: taken as given so violations surface
    sess.apply(
        "Adversary", C=ctx_prog, s=s, sp=sp, vin=list(vin), vmid=list(vmid), vout=list(vout), R=R
    )


def _same_multiset(a: list, b: list) -> bool:
    if len(a) != len(b):
        return False
    used = [False] * len(b)
    for x in a:
        for i, y in enumerate(b):
            if not used[i] and P.pred_equal(x, y):
                used[i] = True
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# conseq qrhl: variable change in quantum equality


def t_conseq_qrhl(
    sess: ProofSession,
    Q: Sequence[VarDecl],
    Qt: Sequence[VarDecl],
    Qp: Optional[Sequence[VarDecl]] = None,
    Qtp: Optional[Sequence[VarDecl]] = None,
) -> None:
    sess.apply(
        "EqVarChange",
        Q=list(Q),
        Qp=list(Qp) if Qp is not None else list(Q),
        Qt=list(Qt),
        Qtp=list(Qtp) if Qtp is not None else list(Qt),
    )


TACTIC_DOC = {
    "seq": "split both programs at a cut predicate",
    "sym": "swap the two sides",
    "case": "case split over the finite values of an expression",
    "conseq": "weaken/strengthen pre- and postcondition (numeric inclusions)",
    "skip": "close an empty-program goal",
    "frame": "peel a read-only frame conjunct",
    "assign1/assign2": "weakest-precondition step for a classical assignment",
    "sample1/sample2": "weakest-precondition step for sampling",
    "qinit1/qinit2": "weakest-precondition step for quantum initialization",
    "qapply1/qapply2": "weakest-precondition step for a unitary application",
    "measure1/measure2": "weakest-precondition step for a measurement",
    "if1/if2/jointif": "conditional rules",
    "while1/while2/jointwhile": "loop rules (totality discharged numerically or left as an obligation)",
    "jointsample": "two-sided sampling with an explicit coupling witness",
    "jointmeasure": "two-sided measurement",
    "rename": "rename program variables on one side",
    "local remove": "strip top-level local declarations on one side",
    "local up": "move local declarations upwards to a fixpoint",
    "jointqiniteq0": "two-sided initialization; drops registers from a quantum equality",
    "byqrhl": "turn a probability comparison into a relational judgment",
    "equal": "adversary rule for mostly-equal programs (infers Vin/Vmid/Vout)",
    "conseq qrhl": "change trailing registers of the pre/post quantum equalities",
}
