"""The inference rules of the relational program logic.

Every rule is applied backwards: the focused goal must match the rule's
conclusion (structurally, after intersection flattening), the decidable side
conditions are checked through the analysis and predicates modules, and the
rule's premises come back as new goals.  A violated premise raises RuleError
naming the premise and a witness; the mutation test suite relies on these
names being stable.

Rules never weaken or synthesize predicates silently: shape-bridging happens
in the tactics layer via Conseq, which emits inclusion goals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .. import analysis as an
from .. import ast as A
from .. import expr as ex
from .. import predicates as P
from ..analysis import Substitution
from ..ast import Program
from ..expr import Expr, TBOOL
from ..linalg import partial_trace
from ..predicates import PredExpr, QVar
from ..semantics import CqOperator, Evaluator, apply_denot
from ..types import VarDecl
from ..workspace import DoubledWorkspace, SingleSpace, Workspace
from .goals import DeneqGoal, Goal, InclusionGoal, Judgment, Obligation, ProbGoal, QrhlGoal


class RuleError(Exception):
    def __init__(self, rule: str, premise: str, witness=None):
        self.rule = rule
        self.premise = premise
        self.witness = witness
        msg = f"rule {rule}: premise violated: {premise}"
        if witness is not None:
            msg += f" (witness: {witness})"
        super().__init__(msg)


@dataclass
class RuleContext:
    ws: Workspace

    def __post_init__(self):
        self.dws = DoubledWorkspace(self.ws)
        self.single = SingleSpace(self.ws)


# ---------------------------------------------------------------------------
# Predicate construction helpers


def index_pred(p: PredExpr, idx: int) -> PredExpr:
    """Lift a single-sided predicate (index-0 variables) to one side."""

    def efn(e):
        return ex.index_expr(e, idx)

    def qfn(q: QVar):
        return QVar(q.var, idx) if q.idx == 0 else q

    return P.map_pred(p, efn, qfn)


def cl_eq_pred(decls: Sequence[VarDecl]) -> PredExpr:
    eqs = [ex.eq(ex.var(d, 1), ex.var(d, 2)) for d in decls]
    return P.PCL(ex.conj_all(eqs))


def quanteq_both_sides(decls: Sequence[VarDecl]) -> PredExpr:
    return P.quanteq(tuple(QVar(d, 1) for d in decls), tuple(QVar(d, 2) for d in decls))


def eqv_pred(decls: Sequence[VarDecl]) -> PredExpr:
    """The mixed equality for an ordered variable list (aux names excluded by caller)."""
    return P.eq_vars(decls)


def conjuncts(p: PredExpr) -> list:
    if isinstance(p, P.PInter):
        out = []
        for c in p.items:
            out.extend(conjuncts(c))
        return out
    if isinstance(p, P.PTop):
        return []
    return [p]


def pred_matches(a: PredExpr, b: PredExpr) -> bool:
    """Structural equality modulo intersection flattening/Top elision and conjunct order."""
    ca, cb = conjuncts(a), conjuncts(b)
    if len(ca) != len(cb):
        return False
    used = [False] * len(cb)
    for x in ca:
        for i, y in enumerate(cb):
            if not used[i] and P.pred_equal(x, y):
                used[i] = True
                break
        else:
            return False
    return True


def subst_assign(post: PredExpr, xs: Sequence[VarDecl], e: Expr, idx: int) -> PredExpr:
    """post[e_idx / xs_idx]: substitute the (indexed) assigned expression."""
    e_idx = ex.index_expr(e, idx)
    out = post
    if len(xs) == 1:
        return P.subst_classical(out, xs[0].name, idx, e_idx)
    for i, x in enumerate(xs):
        out = P.subst_classical(out, x.name, idx, ex.proj(e_idx, i))
    return out


def subst_value(post: PredExpr, xs: Sequence[VarDecl], value, idx: int) -> PredExpr:
    """post[z / xs_idx] for a concrete value z of typel(xs)."""
    if len(xs) == 1:
        return P.subst_classical(post, xs[0].name, idx, ex.const(value, xs[0].ty))
    out = post
    for i, x in enumerate(xs):
        out = P.subst_classical(out, x.name, idx, ex.const(value[i], x.ty))
    return out


def values_of(xs: Sequence[VarDecl]):
    import itertools

    if len(xs) == 1:
        return list(xs[0].ty.values)
    return [tuple(c) for c in itertools.product(*[x.ty.values for x in xs])]


def default_state_expr(decls: Sequence[VarDecl]) -> Expr:
    return ex.ket(tuple(d.default_value for d in decls), tuple(d.ty for d in decls))


def _cl(decls):
    return [d for d in decls if d.is_classical]


def _qu(decls):
    return [d for d in decls if d.is_quantum]


def _names(decls):
    return frozenset(d.name for d in decls)


def _kind_split(ws: Workspace, names) -> tuple:
    cl, qu = set(), set()
    for n in names:
        if ws.has(n):
            (cl if ws.var(n).is_classical else qu).add(n)
        else:
            qu.add(n)  # unknown names conservatively quantum (aux)
    return frozenset(cl), frozenset(qu)


def _expect_qrhl(rule: str, goal: Goal) -> Judgment:
    if not isinstance(goal, QrhlGoal):
        raise RuleError(rule, "goal shape", "not a relational judgment goal")
    return goal.j


def _split(rule: str, prog: Program, n: int) -> tuple:
    stmts = A.flatten(prog)
    if not (0 <= n <= len(stmts)):
        raise RuleError(rule, "split position", f"{n} out of range for {len(stmts)} statements")
    return A.seq(stmts[:n]), A.seq(stmts[n:])


def _single_stmt(rule: str, prog: Program, kind) -> Program:
    stmts = A.flatten(prog)
    if len(stmts) != 1 or not isinstance(stmts[0], kind):
        raise RuleError(rule, "goal shape", f"program must be a single {kind.__name__} statement")
    return stmts[0]


def _require_skip(rule: str, prog: Program, side: str):
    if A.flatten(prog):
        raise RuleError(rule, "goal shape", f"{side} program must be skip")


def _pred_fv_base(p: PredExpr) -> frozenset:
    return P.fv_pred_base(p)


def _implies_expr(e1: Expr, f2: Expr, rel: str) -> Expr:
    if rel == "<=":
        return ex.or_(ex.not_(e1), f2)
    if rel == "=":
        return ex.eq(e1, f2)
    if rel == ">=":
        return ex.or_(e1, ex.not_(f2))
    raise ValueError(f"bad relation {rel}")


# ---------------------------------------------------------------------------
# Figure 1: general rules


def rule_sym(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("Sym", goal)
    return [QrhlGoal(Judgment(P.swap_indices(j.pre), j.right, j.left, P.swap_indices(j.post)))]


def rule_conseq(ctx: RuleContext, goal: Goal, pre: PredExpr, post: PredExpr) -> list:
    j = _expect_qrhl("Conseq", goal)
    return [
        InclusionGoal(j.pre, pre),
        InclusionGoal(post, j.post),
        QrhlGoal(Judgment(pre, j.left, j.right, post)),
    ]


def rule_seq(ctx: RuleContext, goal: Goal, i: int, k: int, cut: PredExpr) -> list:
    j = _expect_qrhl("Seq", goal)
    c1, d1 = _split("Seq", j.left, i)
    c2, d2 = _split("Seq", j.right, k)
    return [
        QrhlGoal(Judgment(j.pre, c1, c2, cut)),
        QrhlGoal(Judgment(cut, d1, d2, j.post)),
    ]


def rule_case(ctx: RuleContext, goal: Goal, e: Expr) -> list:
    j = _expect_qrhl("Case", goal)
    if any(idx == 0 for _, idx in ex.fv_expr(e)):
        raise RuleError("Case", "case expression over indexed variables", A.print_expr(e))
    if not isinstance(e.ty, (ex.TAtom, ex.TTuple)):
        raise RuleError("Case", "case expression has a finite value type", str(e.ty))
    goals = []
    if isinstance(e.ty, ex.TAtom):
        zs = [(v, ex.const(v, e.ty.ft)) for v in e.ty.ft.values]
    else:
        import itertools

        combos = itertools.product(*[t.ft.values for t in e.ty.items])
        zs = []
        for combo in combos:
            items = [ex.const(v, t.ft) for v, t in zip(combo, e.ty.items)]
            zs.append((tuple(combo), ex.tuple_(items)))
    for _, zconst in zs:
        pre = P.inter([P.PCL(ex.eq(e, zconst)), j.pre])
        goals.append(QrhlGoal(Judgment(pre, j.left, j.right, j.post)))
    return goals


def rule_equal(ctx: RuleContext, goal: Goal, X: Sequence[VarDecl], Q: Sequence[VarDecl]) -> list:
    j = _expect_qrhl("Equal", goal)
    if not A.program_equal(j.left, j.right):
        raise RuleError("Equal", "both programs identical")
    cover = _names(X) | _names(Q)
    missing = an.fv(j.left) - cover
    if missing:
        raise RuleError("Equal", "fv c ⊆ XQ", sorted(missing))
    want = P.inter([cl_eq_pred(X), quanteq_both_sides(Q)])
    if not pred_matches(j.pre, want):
        raise RuleError("Equal", "precondition shape CL(X1=X2) ∩ (Q1 ==q Q2)")
    if not pred_matches(j.post, want):
        raise RuleError("Equal", "postcondition shape CL(X1=X2) ∩ (Q1 ==q Q2)")
    return []


def rule_frame(
    ctx: RuleContext,
    goal: Goal,
    pre: PredExpr,
    post: PredExpr,
    frame: PredExpr,
    V: Optional[Sequence[VarDecl]] = None,
    Vp: Optional[Sequence[VarDecl]] = None,
) -> list:
    j = _expect_qrhl("Frame", goal)
    fvR = P.fv_pred(frame)
    if V is None:
        V = [ctx.ws.var(n) for n, i in fvR if i == 1 and ctx.ws.has(n)]
    if Vp is None:
        Vp = [ctx.ws.var(n) for n, i in fvR if i == 2 and ctx.ws.has(n)]
    vn, vpn = _names(V), _names(Vp)
    for n, i in fvR:
        if i == 1 and n not in vn or i == 2 and n not in vpn:
            raise RuleError("Frame", "fv R ⊆ V1 V'2", f"{n}{i}")
    fvc, fvd = an.fv(j.left), an.fv(j.right)
    for n in sorted(fvc & vn):
        if ctx.ws.var(n).is_quantum:
            raise RuleError("Frame", "fv c ∩ V is classical", n)
    for n in sorted(fvd & vpn):
        if ctx.ws.var(n).is_quantum:
            raise RuleError("Frame", "fv d ∩ V' is classical", n)
    wc = fvc & vn & an.written(j.left)
    if wc:
        raise RuleError("Frame", "c is (fv c ∩ V)-readonly", sorted(wc))
    wd = fvd & vpn & an.written(j.right)
    if wd:
        raise RuleError("Frame", "d is (fv d ∩ V')-readonly", sorted(wd))
    if not pred_matches(j.pre, P.inter([pre, frame])):
        raise RuleError("Frame", "precondition shape A ∩ R")
    if not pred_matches(j.post, P.inter([post, frame])):
        raise RuleError("Frame", "postcondition shape B ∩ R")
    return [QrhlGoal(Judgment(pre, j.left, j.right, post))]


def _marginal(rho: CqOperator, dws: DoubledWorkspace, side: int) -> CqOperator:
    base = dws.base
    keep = dws.side_slots(side)
    out = CqOperator(base)
    n = len(base.classical)
    for key, mat in rho.branches.items():
        m = key[:n] if side == 1 else key[n:]
        out.add_branch(m, partial_trace(mat, dws.qdims, keep))
    return out.prune()


def coupling_from_products(ctx: RuleContext, terms) -> CqOperator:
    """Build a separable doubled state from (weight, left cq, right cq) terms."""
    dws = ctx.dws
    out = CqOperator(dws)
    for w, left, right in terms:
        if w < 0:
            raise ValueError("separable decomposition weights must be nonnegative")
        for m1, a in left.branches.items():
            for m2, b in right.branches.items():
                out.add_branch(tuple(m1) + tuple(m2), w * np.kron(a, b))
    return out


def _cq_close(a: CqOperator, b: CqOperator, tol: float = 1e-9) -> bool:
    keys = set(a.branches) | set(b.branches)
    return all(float(np.max(np.abs(a.branch(k) - b.branch(k)))) <= tol for k in keys)


def rule_qrhlelim(ctx: RuleContext, goal: Goal, pre: PredExpr, terms) -> list:
    if not isinstance(goal, ProbGoal):
        raise RuleError("QrhlElim", "goal shape", "not a probability goal")
    rho = coupling_from_products(ctx, terms)
    rho.assert_state()
    if not P.satisfies(rho, pre, ctx.dws):
        raise RuleError("QrhlElim", "rho satisfies A")
    if not _cq_close(_marginal(rho, ctx.dws, 1), goal.rho_l):
        raise RuleError("QrhlElim", "rho1 = tr2 rho matches the left state")
    if not _cq_close(_marginal(rho, ctx.dws, 2), goal.rho_r):
        raise RuleError("QrhlElim", "rho2 = tr1 rho matches the right state")
    post = P.PCL(_implies_expr(ex.index_expr(goal.e, 1), ex.index_expr(goal.f, 2), goal.rel))
    return [QrhlGoal(Judgment(pre, goal.c, goal.d, post))]


def rule_qrhlelimeq(
    ctx: RuleContext, goal: Goal, X: Sequence[VarDecl], Q: Sequence[VarDecl], pre: PredExpr
) -> list:
    if not isinstance(goal, ProbGoal):
        raise RuleError("QrhlElimEq", "goal shape", "not a probability goal")
    if goal.rho_l is not goal.rho_r and not _cq_close(goal.rho_l, goal.rho_r):
        raise RuleError("QrhlElimEq", "both sides run on the same input state")
    rho = goal.rho_l
    rho.assert_state()
    if not P.satisfies(rho, pre, ctx.single):
        raise RuleError("QrhlElimEq", "rho satisfies A")
    cover = _names(X) | _names(Q)
    for prog, nm in ((goal.c, "c"), (goal.d, "d")):
        missing = an.fv(prog) - cover
        if missing:
            raise RuleError("QrhlElimEq", f"fv {nm} ⊆ XQ", sorted(missing))
    _, quA = _kind_split(ctx.ws, _pred_fv_base(pre))
    if not quA <= _names(Q):
        raise RuleError("QrhlElimEq", "qu(fv A) ⊆ Q", sorted(quA - _names(Q)))
    jpre = P.inter([cl_eq_pred(X), quanteq_both_sides(Q), index_pred(pre, 1), index_pred(pre, 2)])
    post = P.PCL(_implies_expr(ex.index_expr(goal.e, 1), ex.index_expr(goal.f, 2), goal.rel))
    return [QrhlGoal(Judgment(jpre, goal.c, goal.d, post))]


def rule_qrhlelimeqnew(
    ctx: RuleContext, goal: Goal, X: Sequence[VarDecl], Q: Sequence[VarDecl], pre: PredExpr
) -> list:
    if not isinstance(goal, ProbGoal):
        raise RuleError("QrhlElimEqNew", "goal shape", "not a probability goal")
    if goal.rho_l is not goal.rho_r and not _cq_close(goal.rho_l, goal.rho_r):
        raise RuleError("QrhlElimEqNew", "both sides run on the same input state")
    rho = goal.rho_l
    rho.assert_state()
    if not P.satisfies(rho, pre, ctx.single):
        raise RuleError("QrhlElimEqNew", "rho satisfies A")
    xn, qn = _names(X), _names(Q)
    for prog, nm in ((goal.c, "c"), (goal.d, "d")):
        need = an.fv(prog) - an.overwr(prog)
        ncl, nqu = _kind_split(ctx.ws, need)
        if not ncl <= xn:
            raise RuleError("QrhlElimEqNew", f"XQ ⊇ fv {nm} \\ overwr {nm}", sorted(ncl - xn))
        if not nqu <= qn:
            raise RuleError("QrhlElimEqNew", f"XQ ⊇ fv {nm} \\ overwr {nm}", sorted(nqu - qn))
    acl, aqu = _kind_split(ctx.ws, _pred_fv_base(pre))
    if not acl <= xn or not aqu <= qn:
        raise RuleError("QrhlElimEqNew", "XQ ⊇ fv A", sorted((acl - xn) | (aqu - qn)))
    jpre = P.inter([cl_eq_pred(X), quanteq_both_sides(Q), index_pred(pre, 1), index_pred(pre, 2)])
    post = P.PCL(_implies_expr(ex.index_expr(goal.e, 1), ex.index_expr(goal.f, 2), goal.rel))
    return [QrhlGoal(Judgment(jpre, goal.c, goal.d, post))]


def rule_trans_simple(ctx: RuleContext, goal: Goal, middle: Program) -> list:
    j = _expect_qrhl("TransSimple", goal)

    def sig(prog):
        names = sorted(an.fv(prog))
        cls = [ctx.ws.var(n) for n in names if ctx.ws.var(n).is_classical]
        qus = [ctx.ws.var(n) for n in names if ctx.ws.var(n).is_quantum]
        return cls, qus

    xc, qc = sig(j.left)
    xd, qd = sig(middle)
    xe, qe = sig(j.right)

    def shape(xa, qa, xb, qb):
        eqs = [ex.eq(ex.var(a, 1), ex.var(b, 2)) for a, b in zip(xa, xb)]
        return P.inter(
            [P.PCL(ex.conj_all(eqs)), P.quanteq(tuple(QVar(d, 1) for d in qa), tuple(QVar(d, 2) for d in qb))]
        )

    if len(xc) != len(xe) or any(a.ty != b.ty for a, b in zip(xc, xe)):
        raise RuleError("TransSimple", "classical variable signatures of c and e compatible")
    if len(qc) != len(qe) or any(a.ty != b.ty for a, b in zip(qc, qe)):
        raise RuleError("TransSimple", "quantum variable signatures of c and e compatible")
    if len(xc) != len(xd) or len(qc) != len(qd) or any(a.ty != b.ty for a, b in zip(qc, qd)) or any(
        a.ty != b.ty for a, b in zip(xc, xd)
    ):
        raise RuleError("TransSimple", "middle program signature compatible")
    want = shape(xc, qc, xe, qe)
    if not pred_matches(j.pre, want) or not pred_matches(j.post, want):
        raise RuleError("TransSimple", "pre/postcondition shape CL(Xc1=Xe2) ∩ (Qc1 ==q Qe2)")
    return [
        QrhlGoal(Judgment(shape(xc, qc, xd, qd), j.left, middle, shape(xc, qc, xd, qd))),
        QrhlGoal(Judgment(shape(xd, qd, xe, qe), middle, j.right, shape(xd, qd, xe, qe))),
    ]


# ---------------------------------------------------------------------------
# Figure 2: classical statements


def rule_skip(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("Skip", goal)
    _require_skip("Skip", j.left, "left")
    _require_skip("Skip", j.right, "right")
    if not pred_matches(j.pre, j.post):
        raise RuleError("Skip", "pre equals post")
    return []


def _assign_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"Assign{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.Assign)
    _require_skip(name, other, "other")
    want = subst_assign(j.post, st.xs, st.e, side)
    if not pred_matches(j.pre, want):
        raise RuleError(name, "precondition is B[e/x] for the assigned expression")
    return []


def rule_assign1(ctx, goal):
    return _assign_rule(ctx, goal, 1)


def rule_assign2(ctx, goal):
    return _assign_rule(ctx, goal, 2)


def sample_pre(post: PredExpr, st: A.Sample, side: int) -> PredExpr:
    e_idx = ex.index_expr(st.e, side)
    parts = [P.PCL(ex.total(e_idx))]
    for z in values_of(st.xs):
        guard = P.PCL(ex.not_(ex.insupp(e_idx, _const_of(st.xs, z))))
        parts.append(P.psum([subst_value(post, st.xs, z, side), guard]))
    return P.inter(parts)


def _const_of(xs: Sequence[VarDecl], z) -> Expr:
    if len(xs) == 1:
        return ex.const(z, xs[0].ty)
    return ex.tuple_([ex.const(v, x.ty) for v, x in zip(z, xs)])


def _sample_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"Sample{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.Sample)
    _require_skip(name, other, "other")
    if not pred_matches(j.pre, sample_pre(j.post, st, side)):
        raise RuleError(name, "precondition is CL(total e) ∩ ⋂_z (B[z/x] + CL(z ∉ supp e))")
    return []


def rule_sample1(ctx, goal):
    return _sample_rule(ctx, goal, 1)


def rule_sample2(ctx, goal):
    return _sample_rule(ctx, goal, 2)


def joint_sample_pre(post: PredExpr, st1: A.Sample, st2: A.Sample, witness: Expr) -> PredExpr:
    e1 = ex.index_expr(st1.e, 1)
    e2 = ex.index_expr(st2.e, 2)
    marg_ok = ex.and_(ex.eq(ex.marginal(witness, 0), e1), ex.eq(ex.marginal(witness, 1), e2))
    parts = [P.PCL(marg_ok)]
    for z in values_of(st1.xs):
        for zp in values_of(st2.xs):
            pair = ex.tuple_([_const_of(st1.xs, z), _const_of(st2.xs, zp)])
            guard = P.PCL(ex.not_(ex.insupp(witness, pair)))
            body = subst_value(subst_value(post, st1.xs, z, 1), st2.xs, zp, 2)
            parts.append(P.psum([body, guard]))
    return P.inter(parts)


def rule_joint_sample(ctx: RuleContext, goal: Goal, witness: Expr) -> list:
    j = _expect_qrhl("JointSample", goal)
    st1 = _single_stmt("JointSample", j.left, A.Sample)
    st2 = _single_stmt("JointSample", j.right, A.Sample)
    want_carrier = ex.TTuple((ex.type_of_vars(st1.xs), ex.type_of_vars(st2.xs)))
    if not isinstance(witness.ty, ex.TDist) or witness.ty.carrier != want_carrier:
        raise RuleError("JointSample", "witness is a joint distribution on typel X × typel Y", str(witness.ty))
    if any(idx == 0 for _, idx in ex.fv_expr(witness)):
        raise RuleError("JointSample", "witness expression uses indexed variables only")
    if not pred_matches(j.pre, joint_sample_pre(j.post, st1, st2, witness)):
        raise RuleError("JointSample", "precondition matches the joint-sampling form")
    return []


def _if_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"If{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.If)
    _require_skip(name, other, "other")
    e_idx = ex.index_expr(st.e, side)
    skip = A.Skip()

    def mk(guard, branch):
        pre = P.inter([P.PCL(guard), j.pre])
        left, right = (branch, skip) if side == 1 else (skip, branch)
        return QrhlGoal(Judgment(pre, left, right, j.post))

    return [mk(e_idx, st.then), mk(ex.not_(e_idx), st.other)]


def rule_if1(ctx, goal):
    return _if_rule(ctx, goal, 1)


def rule_if2(ctx, goal):
    return _if_rule(ctx, goal, 2)


def rule_joint_if(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("JointIf", goal)
    st1 = _single_stmt("JointIf", j.left, A.If)
    st2 = _single_stmt("JointIf", j.right, A.If)
    e1 = ex.index_expr(st1.e, 1)
    e2 = ex.index_expr(st2.e, 2)
    return [
        InclusionGoal(j.pre, P.PCL(ex.eq(e1, e2))),
        QrhlGoal(Judgment(P.inter([P.PCL(ex.and_(e1, e2)), j.pre]), st1.then, st2.then, j.post)),
        QrhlGoal(
            Judgment(P.inter([P.PCL(ex.and_(ex.not_(e1), ex.not_(e2))), j.pre]), st1.other, st2.other, j.post)
        ),
    ]


def _while_totality(ctx: RuleContext, st: A.While, bound: PredExpr):
    """Try to discharge totality of the loop on states satisfying ``bound``."""
    from ..linalg import basis_vector

    ws = ctx.ws
    single = ctx.single
    for m in ws.memories():
        space = P.eval_pred(bound, (m,), single)
        for col in range(space.dim):
            v = space.basis[:, col]
            rho = CqOperator(ws, {m: np.outer(v, v.conj())})
            ev = Evaluator(ws)
            out = ev.run(st, rho)
            if ev.diag.while_nonconvergence:
                return False, f"loop does not terminate on a state at memory {m}"
            if abs(float(np.real(out.trace())) - float(np.real(rho.trace()))) > 1e-9:
                return False, f"loop loses mass on a state at memory {m}"
    return True, "loop converged on a spanning family of the totality predicate"


def _while_rule(ctx: RuleContext, goal: Goal, side: int, total_on: Optional[PredExpr]) -> list:
    name = f"While{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.While)
    _require_skip(name, other, "other")
    e_idx = ex.index_expr(st.e, side)
    if not pred_matches(j.post, P.inter([P.PCL(ex.not_(e_idx)), j.pre])):
        raise RuleError(name, "postcondition is CL(¬e) ∩ A for the loop invariant A")
    bound = total_on if total_on is not None else P.PTop()
    goals: list = []
    skip = A.Skip()
    left, right = (st.body, skip) if side == 1 else (skip, st.body)
    goals.append(QrhlGoal(Judgment(P.inter([P.PCL(e_idx), j.pre]), left, right, j.pre)))
    goals.append(InclusionGoal(j.pre, index_pred(bound, side)))
    ok, note = _while_totality(ctx, st, bound)
    if ok:
        goals.append(DischargedTotality(f"totality: {note}"))
    else:
        goals.append(Obligation(f"(while {A.print_expr(st.e)} ...) is total on {P.print_pred(bound)}: {note}"))
    return goals


class DischargedTotality(Obligation):
    """Totality obligation carrying its numeric convergence report; auto-closed."""


def rule_while1(ctx, goal, total_on=None):
    return _while_rule(ctx, goal, 1, total_on)


def rule_while2(ctx, goal, total_on=None):
    return _while_rule(ctx, goal, 2, total_on)


def rule_joint_while(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("JointWhile", goal)
    st1 = _single_stmt("JointWhile", j.left, A.While)
    st2 = _single_stmt("JointWhile", j.right, A.While)
    e1 = ex.index_expr(st1.e, 1)
    e2 = ex.index_expr(st2.e, 2)
    if not pred_matches(j.post, P.inter([P.PCL(ex.and_(ex.not_(e1), ex.not_(e2))), j.pre])):
        raise RuleError("JointWhile", "postcondition is CL(¬e1 ∧ ¬e'2) ∩ A")
    return [
        InclusionGoal(j.pre, P.PCL(ex.eq(e1, e2))),
        QrhlGoal(Judgment(P.inter([P.PCL(ex.and_(e1, e2)), j.pre]), st1.body, st2.body, j.pre)),
    ]


# ---------------------------------------------------------------------------
# Figure 3: quantum statements


def qinit_pre(post: PredExpr, st: A.QInit, side: int) -> PredExpr:
    psi = ex.index_expr(st.e, side)
    return P.PSpaceAt(post, psi, tuple(QVar(q, side) for q in st.qs))


def _qinit_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"QInit{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.QInit)
    _require_skip(name, other, "other")
    if not pred_matches(j.pre, qinit_pre(j.post, st, side)):
        raise RuleError(name, "precondition is B ÷ (e»Q)")
    return []


def rule_qinit1(ctx, goal):
    return _qinit_rule(ctx, goal, 1)


def rule_qinit2(ctx, goal):
    return _qinit_rule(ctx, goal, 2)


def qapply_pre(post: PredExpr, st: A.QApply, side: int) -> PredExpr:
    op = ex.index_expr(st.e, side)
    qs = tuple(QVar(q, side) for q in st.qs)
    return P.PImage(op, qs, P.inter([post, P.PLift(op, qs)]), adjoint=True)


def _qapply_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"QApply{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.QApply)
    _require_skip(name, other, "other")
    if not pred_matches(j.pre, qapply_pre(j.post, st, side)):
        raise RuleError(name, "precondition is (e»Q)† (B ∩ im(e»Q))")
    return []


def rule_qapply1(ctx, goal):
    return _qapply_rule(ctx, goal, 1)


def rule_qapply2(ctx, goal):
    return _qapply_rule(ctx, goal, 2)


def measure_pre(post: PredExpr, st: A.Measure, side: int) -> PredExpr:
    meas = ex.index_expr(st.e, side)
    qs = tuple(QVar(q, side) for q in st.qs)
    parts = [P.PCL(ex.totalmeas(meas))]
    for z in values_of(st.xs):
        proj = ex.measapp(meas, _const_of(st.xs, z))
        lift = P.PLift(proj, qs)
        body = P.inter([subst_value(post, st.xs, z, side), lift])
        parts.append(P.psum([body, P.POrtho(lift)]))
    return P.inter(parts)


def _measure_rule(ctx: RuleContext, goal: Goal, side: int) -> list:
    name = f"Measure{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    st = _single_stmt(name, own, A.Measure)
    _require_skip(name, other, "other")
    if not pred_matches(j.pre, measure_pre(j.post, st, side)):
        raise RuleError(name, "precondition matches the one-sided measurement form")
    return []


def rule_measure1(ctx, goal):
    return _measure_rule(ctx, goal, 1)


def rule_measure2(ctx, goal):
    return _measure_rule(ctx, goal, 2)


def joint_measure_pre(post: PredExpr, st1: A.Measure, st2: A.Measure) -> PredExpr:
    m1 = ex.index_expr(st1.e, 1)
    m2 = ex.index_expr(st2.e, 2)
    q1 = tuple(QVar(q, 1) for q in st1.qs)
    q2 = tuple(QVar(q, 2) for q in st2.qs)
    parts = [P.PCL(ex.eq(m1, m2)), P.quanteq(q1, q2)]
    for z in values_of(st1.xs):
        f1 = P.PLift(ex.measapp(m1, _const_of(st1.xs, z)), q1)
        f2 = P.PLift(ex.measapp(m2, _const_of(st2.xs, z)), q2)
        body = P.inter([subst_value(subst_value(post, st1.xs, z, 1), st2.xs, z, 2), f1, f2])
        parts.append(P.psum([body, P.POrtho(f1), P.POrtho(f2)]))
    return P.inter(parts)


def rule_joint_measure_simple(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("JointMeasureSimple", goal)
    st1 = _single_stmt("JointMeasureSimple", j.left, A.Measure)
    st2 = _single_stmt("JointMeasureSimple", j.right, A.Measure)
    if ex.type_of_vars(st1.xs) != ex.type_of_vars(st2.xs):
        raise RuleError("JointMeasureSimple", "outcome variable types coincide")
    if tuple(q.ty for q in st1.qs) != tuple(q.ty for q in st2.qs):
        raise RuleError("JointMeasureSimple", "measured register types coincide")
    if not pred_matches(j.pre, joint_measure_pre(j.post, st1, st2)):
        raise RuleError("JointMeasureSimple", "precondition matches the joint measurement form")
    return []


# ---------------------------------------------------------------------------
# Variable renaming / removal


def _rename_rule(ctx: RuleContext, goal: Goal, side: int, sigma: Substitution) -> list:
    name = f"RenameQrhl{side}"
    j = _expect_qrhl(name, goal)
    own = j.left if side == 1 else j.right
    ok, witness = an.no_conflict(sigma, own)
    if not ok:
        raise RuleError(name, "no_conflict σ c", str(witness))
    pred_names = {n for n, i in P.fv_pred(j.pre) | P.fv_pred(j.post) if i == side}
    domain = an.fv(own) | pred_names
    decls = [ctx.ws.var(n) for n in sorted(domain) if ctx.ws.has(n)]
    if not sigma.injective_on(decls):
        raise RuleError(name, "σ injective on fv c ∪ {v : v_i ∈ fv A ∪ fv B}")
    mapping = dict(sigma.items())
    new_pre = P.rename_indexed(j.pre, mapping, side)
    new_post = P.rename_indexed(j.post, mapping, side)
    new_prog = an.subst_vars(own, sigma)
    if side == 1:
        return [QrhlGoal(Judgment(new_pre, new_prog, j.right, new_post))]
    return [QrhlGoal(Judgment(new_pre, j.left, new_prog, new_post))]


def rule_rename1(ctx, goal, sigma):
    return _rename_rule(ctx, goal, 1, sigma)


def rule_rename2(ctx, goal, sigma):
    return _rename_rule(ctx, goal, 2, sigma)


def local_init_conjuncts(decls: Sequence[VarDecl], side: int) -> list:
    """(qu(V) =q psi_init) and CL(cl(V) = defaults) conjuncts for one side."""
    out = []
    qus, cls = _qu(decls), _cl(decls)
    if qus:
        psi = default_state_expr(qus)
        out.append(P.PQEqState(tuple(QVar(d, side) for d in qus), psi))
    if cls:
        eqs = [ex.eq(ex.var(d, side), ex.const(d.default_value, d.ty)) for d in cls]
        out.append(P.PCL(ex.conj_all(eqs)))
    return out


def _remove_local_rule(ctx: RuleContext, goal: Goal, side: int, include_init: bool) -> list:
    name = f"RemoveLocal{side}"
    j = _expect_qrhl(name, goal)
    own, other = (j.left, j.right) if side == 1 else (j.right, j.left)
    from ..rewrite import collect_local_chain

    vs, body = collect_local_chain(own)
    if not vs:
        raise RuleError(name, "goal shape", f"{'left' if side == 1 else 'right'} program must start with local")
    vnames = _names(vs)
    bad = {(n, i) for n, i in P.fv_pred(j.pre) | P.fv_pred(j.post) if i == side and n in vnames}
    if bad:
        raise RuleError(name, "fv A, fv B ∩ V_i = ∅", sorted(f"{n}{i}" for n, i in bad))
    conj = [j.pre] + (local_init_conjuncts(vs, side) if include_init else [])
    pre = P.inter(conj)
    if side == 1:
        return [QrhlGoal(Judgment(pre, body, other, j.post))]
    return [QrhlGoal(Judgment(pre, other, body, j.post))]


def rule_remove_local1(ctx, goal, include_init: bool = True):
    return _remove_local_rule(ctx, goal, 1, include_init)


def rule_remove_local2(ctx, goal, include_init: bool = True):
    return _remove_local_rule(ctx, goal, 2, include_init)


# ---------------------------------------------------------------------------
# Two-sided initialization


def _find_quanteq(rule: str, p: PredExpr, which: str):
    """Split a predicate into (rest conjuncts, the unique quantum-equality conjunct)."""
    cs = conjuncts(p)
    eqs = [c for c in cs if isinstance(c, P.PQuantEq)]
    if len(eqs) != 1:
        raise RuleError(rule, f"{which} contains exactly one quantum-equality conjunct", len(eqs))
    rest = [c for c in cs if c is not eqs[0]]
    return rest, eqs[0]


def rule_joint_qinit_eq0(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("JointQInitEq0", goal)
    st1 = _single_stmt("JointQInitEq0", j.left, A.QInit)
    st2 = _single_stmt("JointQInitEq0", j.right, A.QInit)
    rest_post, eq_post = _find_quanteq("JointQInitEq0", j.post, "postcondition")
    if eq_post.opA is not None or eq_post.opB is not None:
        raise RuleError("JointQInitEq0", "postcondition equality carries no operators")
    R1, R2 = eq_post.X, eq_post.Y
    q1 = tuple(QVar(q, 1) for q in st1.qs)
    q2 = tuple(QVar(q, 2) for q in st2.qs)
    want_pre = P.inter(rest_post + [P.quanteq(R1 + q1, R2 + q2)])
    if not pred_matches(j.pre, want_pre):
        raise RuleError("JointQInitEq0", "precondition is B ∩ (R1 Q1 ==q R'2 Q'2)")
    bn = P.fv_pred(P.inter(rest_post)) if rest_post else frozenset()
    forbidden = {(q.name, 1) for q in q1} | {(q.name, 2) for q in q2}
    clash = bn & forbidden
    if clash:
        raise RuleError("JointQInitEq0", "fv B ∩ Q1 Q'2 = ∅", sorted(f"{n}{i}" for n, i in clash))
    return []


def _tensor_ops(a: Optional[Expr], a_regs, b: Optional[Expr], b_regs) -> Optional[Expr]:
    """Literal tensor (a on a_regs) ⊗ (b on b_regs); None means identity."""
    if a is None and b is None:
        return None
    dA = 1
    for q in a_regs:
        dA *= q.var.ty.size
    dB = 1
    for q in b_regs:
        dB *= q.var.ty.size
    ma = np.asarray(a.value, dtype=complex) if isinstance(a, ex.Const) else np.eye(dA, dtype=complex)
    mb = np.asarray(b.value, dtype=complex) if isinstance(b, ex.Const) else np.eye(dB, dtype=complex)
    if a is not None and not isinstance(a, ex.Const) or b is not None and not isinstance(b, ex.Const):
        raise RuleError("JointQInitEq", "operator arguments must be literal isometries")
    return ex.Const(ex.TOp(tuple(q.var.ty for q in tuple(a_regs) + tuple(b_regs))), np.kron(ma, mb))


def rule_joint_qinit_eq(
    ctx: RuleContext,
    goal: Goal,
    U: Optional[Expr] = None,
    Up: Optional[Expr] = None,
) -> list:
    """Extended two-sided initialization.

    The operator V/V' on the retained registers is read off the postcondition
    equality; U/U' on the initialized registers are rule arguments.  Isometry
    of all four is guaranteed by operator-literal construction.
    """
    j = _expect_qrhl("JointQInitEq", goal)
    st1 = _single_stmt("JointQInitEq", j.left, A.QInit)
    st2 = _single_stmt("JointQInitEq", j.right, A.QInit)
    rest_post, eq_post = _find_quanteq("JointQInitEq", j.post, "postcondition")
    q1 = tuple(QVar(q, 1) for q in st1.qs)
    q2 = tuple(QVar(q, 2) for q in st2.qs)
    psi1 = ex.index_expr(st1.e, 1)
    psi2 = ex.index_expr(st2.e, 2)
    state1 = [c for c in rest_post if isinstance(c, P.PQEqState) and c.Q == q1]
    state2 = [c for c in rest_post if isinstance(c, P.PQEqState) and c.Q == q2]
    if not state1 or not ex.expr_equal(state1[0].psi, psi1):
        raise RuleError("JointQInitEq", "postcondition contains Q1 =q e1")
    if not state2 or not ex.expr_equal(state2[0].psi, psi2):
        raise RuleError("JointQInitEq", "postcondition contains Q'2 =q e'2")
    B = [c for c in rest_post if c is not state1[0] and c is not state2[0]]
    R1, R2 = eq_post.X, eq_post.Y
    want_pre = P.inter(
        B + [P.PQuantEq(R1 + q1, R2 + q2, _tensor_ops(eq_post.opA, R1, U, q1), _tensor_ops(eq_post.opB, R2, Up, q2))]
    )
    if not pred_matches(j.pre, want_pre):
        raise RuleError("JointQInitEq", "precondition is B ∩ ((V⊗U) R1 Q1 ==q (V'⊗U') R'2 Q'2)")
    bn = P.fv_pred(P.inter(B)) if B else frozenset()
    forbidden = {(q.name, 1) for q in q1} | {(q.name, 2) for q in q2}
    clash = bn & forbidden
    if clash:
        raise RuleError("JointQInitEq", "fv B ∩ Q1 Q'2 = ∅", sorted(f"{n}{i}" for n, i in clash))
    return []


def rule_joint_remove_local(
    ctx: RuleContext,
    goal: Goal,
    Qt: Sequence[VarDecl],
    Qtp: Sequence[VarDecl],
    U: Optional[Expr] = None,
    Up: Optional[Expr] = None,
) -> list:
    """Two-sided removal of local declarations, keeping Q̃/Q̃' in the equality."""
    name = "JointRemoveLocal"
    j = _expect_qrhl(name, goal)
    from ..rewrite import collect_local_chain

    vs1, body1 = collect_local_chain(j.left)
    vs2, body2 = collect_local_chain(j.right)
    if not vs1 or not vs2:
        raise RuleError(name, "both sides are local declarations")
    if not _names(Qt) <= _names(_qu(vs1)):
        raise RuleError(name, "Q̃ ⊆ Q", sorted(_names(Qt) - _names(_qu(vs1))))
    if not _names(Qtp) <= _names(_qu(vs2)):
        raise RuleError(name, "Q̃' ⊆ Q'", sorted(_names(Qtp) - _names(_qu(vs2))))
    rest_post, eq_post = _find_quanteq(name, j.post, "postcondition")
    R1, R2 = eq_post.X, eq_post.Y
    fvAB = P.fv_pred(j.pre) | (P.fv_pred(P.inter(rest_post)) if rest_post else frozenset())
    clash = {(nm, i) for nm, i in fvAB if (i == 1 and nm in _names(vs1)) or (i == 2 and nm in _names(vs2))}
    if clash:
        raise RuleError(name, "fv A, fv B ∩ Q1 Q'2 X1 X'2 = ∅", sorted(f"{nm}{i}" for nm, i in clash))
    qt1 = tuple(QVar(d, 1) for d in Qt)
    qt2 = tuple(QVar(d, 2) for d in Qtp)
    sub_pre = P.inter([j.pre] + local_init_conjuncts(vs1, 1) + local_init_conjuncts(vs2, 2))
    sub_eq = P.PQuantEq(
        qt1 + R1, qt2 + R2, _tensor_ops(U, qt1, eq_post.opA, R1), _tensor_ops(Up, qt2, eq_post.opB, R2)
    )
    sub_post = P.inter(rest_post + [sub_eq])
    return [QrhlGoal(Judgment(sub_pre, body1, body2, sub_post))]


def rule_joint_remove_local0(ctx: RuleContext, goal: Goal) -> list:
    j = _expect_qrhl("JointRemoveLocal0", goal)
    from ..rewrite import collect_local_chain

    vs1, body1 = collect_local_chain(j.left)
    vs2, body2 = collect_local_chain(j.right)
    if not vs1 or _names(vs1) != _names(vs2):
        raise RuleError("JointRemoveLocal0", "both sides are local QX ... with the same variables")
    rest_pre, eq_pre = _find_quanteq("JointRemoveLocal0", j.pre, "precondition")
    rest_post, eq_post = _find_quanteq("JointRemoveLocal0", j.post, "postcondition")
    if eq_pre.opA is not None or eq_pre.opB is not None or eq_post.opA is not None or eq_post.opB is not None:
        raise RuleError("JointRemoveLocal0", "equalities carry no operators")
    if eq_pre.X != eq_post.X or eq_pre.Y != eq_post.Y:
        raise RuleError("JointRemoveLocal0", "pre and post equalities range over the same R")
    R1, R2 = eq_pre.X, eq_pre.Y
    locs = vs1
    qus, cls = _qu(locs), _cl(locs)
    fvAB = (P.fv_pred(P.inter(rest_pre)) if rest_pre else frozenset()) | (
        P.fv_pred(P.inter(rest_post)) if rest_post else frozenset()
    )
    clash = {(n, i) for n, i in fvAB if n in _names(locs)}
    if clash:
        raise RuleError("JointRemoveLocal0", "fv A, fv B ∩ Q1 Q2 X1 X2 = ∅", sorted(f"{n}{i}" for n, i in clash))
    q1 = tuple(QVar(d, 1) for d in qus)
    q2 = tuple(QVar(d, 2) for d in qus)
    cl_eq = [P.PCL(ex.conj_all([ex.eq(ex.var(d, 1), ex.var(d, 2)) for d in cls]))] if cls else []
    sub_pre = P.inter(rest_pre + [P.quanteq(q1 + R1, q2 + R2)] + cl_eq)
    sub_post = P.inter(rest_post + [P.quanteq(q1 + R1, q2 + R2)])
    return [QrhlGoal(Judgment(sub_pre, body1, body2, sub_post))]


# ---------------------------------------------------------------------------
# Variable change in quantum equality


def rule_eq_var_change(
    ctx: RuleContext,
    goal: Goal,
    Q: Sequence[VarDecl],
    Qp: Sequence[VarDecl],
    Qt: Sequence[VarDecl],
    Qtp: Sequence[VarDecl],
    US: Optional[Expr] = None,
    USp: Optional[Expr] = None,
    UR: Optional[Expr] = None,
    URp: Optional[Expr] = None,
) -> list:
    """Swap the trailing registers of the pre/post equalities for fresh ones.

    The equality operators must act on the non-swapped prefix only, i.e. have
    the shape U_S ⊗ id; they are supplied as the prefix operators U_S etc.
    """
    j = _expect_qrhl("EqVarChange", goal)
    if tuple(d.ty for d in Q) != tuple(d.ty for d in Qp):
        raise RuleError("EqVarChange", "typel Q = typel Q'")
    if tuple(d.ty for d in Qt) != tuple(d.ty for d in Qtp):
        raise RuleError("EqVarChange", "typel Q̃ = typel Q̃'")
    dq = 1
    for d in Q:
        dq *= d.ty.size
    dqt = 1
    for d in Qt:
        dqt *= d.ty.size
    if dq > dqt:
        raise RuleError("EqVarChange", "|typel Q| ≤ |typel Q̃|", (dq, dqt))

    q1 = tuple(QVar(d, 1) for d in Q)
    q2 = tuple(QVar(d, 2) for d in Qp)
    qt1 = tuple(QVar(d, 1) for d in Qt)
    qt2 = tuple(QVar(d, 2) for d in Qtp)

    def rewrite_side(p: PredExpr, which: str, opl, opr) -> PredExpr:
        rest, eqc = _find_quanteq("EqVarChange", p, which)
        if len(eqc.X) < len(q1) or eqc.X[len(eqc.X) - len(q1) :] != q1 or eqc.Y[len(eqc.Y) - len(q2) :] != q2:
            raise RuleError("EqVarChange", f"{which} equality registers end with Q1 / Q'2")
        S1, S2 = eqc.X[: len(eqc.X) - len(q1)], eqc.Y[: len(eqc.Y) - len(q2)]
        want_opA = _tensor_ops(opl, S1, None, q1)
        want_opB = _tensor_ops(opr, S2, None, q2)
        if not _op_equal(eqc.opA, want_opA) or not _op_equal(eqc.opB, want_opB):
            raise RuleError("EqVarChange", f"{which} equality operators have the shape U ⊗ id")
        fvAB = P.fv_pred(P.inter(rest)) if rest else frozenset()
        bad = {
            (n, i)
            for n, i in fvAB
            if (i == 1 and n in _names(Q) | _names(Qt)) or (i == 2 and n in _names(Qp) | _names(Qtp))
        }
        if bad:
            raise RuleError("EqVarChange", "fv A, fv B ∩ Q1 Q'2 Q̃1 Q̃'2 = ∅", sorted(f"{n}{i}" for n, i in bad))
        return P.inter(rest + [P.PQuantEq(S1 + qt1, S2 + qt2, _tensor_ops(opl, S1, None, qt1), _tensor_ops(opr, S2, None, qt2))])

    bad_c = an.fv(j.left) & (_names(Q) | _names(Qt))
    if bad_c:
        raise RuleError("EqVarChange", "fv c ∩ Q Q̃ = ∅", sorted(bad_c))
    bad_d = an.fv(j.right) & (_names(Qp) | _names(Qtp))
    if bad_d:
        raise RuleError("EqVarChange", "fv d ∩ Q' Q̃' = ∅", sorted(bad_d))
    new_pre = rewrite_side(j.pre, "precondition", US, USp)
    new_post = rewrite_side(j.post, "postcondition", UR, URp)
    return [QrhlGoal(Judgment(new_pre, j.left, j.right, new_post))]


def _op_equal(a: Optional[Expr], b: Optional[Expr]) -> bool:
    if a is None and b is None:
        return True
    if a is None or b is None:
        da = a if a is not None else b
        if isinstance(da, ex.Const):
            m = np.asarray(da.value, dtype=complex)
            return bool(np.allclose(m, np.eye(m.shape[0]), atol=1e-12))
        return False
    return ex.expr_equal(a, b) or (
        isinstance(a, ex.Const)
        and isinstance(b, ex.Const)
        and np.asarray(a.value).shape == np.asarray(b.value).shape
        and bool(np.allclose(np.asarray(a.value), np.asarray(b.value), atol=1e-12))
    )


# ---------------------------------------------------------------------------
# Adversary rule


def rule_adversary(
    ctx: RuleContext,
    goal: Goal,
    C: Program,
    s: Sequence[Program],
    sp: Sequence[Program],
    vin: Sequence[VarDecl],
    vmid: Sequence[VarDecl],
    vout: Sequence[VarDecl],
    R: PredExpr,
) -> list:
    j = _expect_qrhl("Adversary", goal)
    name = "Adversary"
    ws = ctx.ws
    aux = ws.aux
    if aux is None:
        raise RuleError(name, "aux-infinite quantum variable declared in the workspace")
    holes = sorted(A.hole_indices(C))
    n = len(holes)
    if holes != list(range(1, n + 1)) or len(s) != n or len(sp) != n:
        raise RuleError(name, "hole instantiation lists match the context's holes", holes)
    if not A.program_equal(A.instantiate(C, dict(zip(holes, s))), j.left):
        raise RuleError(name, "left program is C[s]")
    if not A.program_equal(A.instantiate(C, dict(zip(holes, sp))), j.right):
        raise RuleError(name, "right program is C[s']")

    VR = frozenset(nm for nm, i in P.fv_pred(R) if i in (1, 2))
    fvC, innerC, coveredC = an.fv(C), an.inner(C), an.covered(C)
    overwrC, writtenC = an.overwr(C), an.written(C)
    vin_n, vout_n = _names(vin), _names(vout)
    vmid_n = _names(vmid) | {aux}

    def qu_names(names):
        return frozenset(nm for nm in names if nm == aux or (ws.has(nm) and ws.var(nm).is_quantum))

    checks = [
        ("aux ∉ VR", aux not in VR, aux),
        ("aux ∉ fv s_i", all(aux not in an.fv(x) for x in list(s) + list(sp)), aux),
        ("inner C ⊆ Vmid", innerC <= vmid_n, sorted(innerC - vmid_n)),
        ("Vout ⊆ Vmid", vout_n <= vmid_n, sorted(vout_n - vmid_n)),
        ("Vout \\ overwr C ⊆ Vin", (vout_n - overwrC) <= vin_n, sorted(vout_n - overwrC - vin_n)),
        ("(Vout \\ Vin) ∩ VR = ∅", not ((vout_n - vin_n) & VR), sorted((vout_n - vin_n) & VR)),
        (
            "qu(Vin) ⊆ Vout ∪ overwr C",
            qu_names(vin_n) <= (vout_n | overwrC),
            sorted(qu_names(vin_n) - vout_n - overwrC),
        ),
        (
            "qu(Vin \\ Vout) ∩ VR = ∅",
            not (qu_names(vin_n - vout_n) & VR),
            sorted(qu_names(vin_n - vout_n) & VR),
        ),
        (
            "Vmid ∩ VR ⊆ Vin ∪ covered C",
            all(nm in vin_n or nm in coveredC for nm in vmid_n & VR),
            sorted(nm for nm in vmid_n & VR if nm not in vin_n and nm not in coveredC),
        ),
        (
            "qu(Vmid ∩ VR) ⊆ Vout ∪ covered C",
            all(nm in vout_n or nm in coveredC for nm in qu_names(vmid_n & VR)),
            sorted(nm for nm in qu_names(vmid_n & VR) if nm not in vout_n and nm not in coveredC),
        ),
        ("fv C ⊆ Vmid", fvC <= vmid_n, sorted(fvC - vmid_n)),
        ("fv C ⊆ Vin ∪ overwr C", fvC <= (vin_n | overwrC), sorted(fvC - vin_n - overwrC)),
        ("fv C ∩ VR ⊆ Vin", (fvC & VR) <= vin_n, sorted((fvC & VR) - vin_n)),
        ("qu(fv C) ⊆ Vout", qu_names(fvC) <= vout_n, sorted(qu_names(fvC) - vout_n)),
        ("VR ∩ inner C = ∅", not (VR & innerC), sorted(VR & innerC)),
        ("VR ∩ written C = ∅", not (VR & writtenC), sorted(VR & writtenC)),
    ]
    for i in range(n):
        fs = an.fv(s[i]) | an.fv(sp[i])
        ov = an.overwr(s[i]) & an.overwr(sp[i])
        cl_ov = frozenset(nm for nm in ov if ws.has(nm) and ws.var(nm).is_classical)
        bad1 = sorted(
            nm for nm in vmid_n & fs if nm not in vin_n and nm not in coveredC and nm not in cl_ov
        )
        checks.append(
            (f"Vmid ∩ (fv s_{i+1} ∪ fv s'_{i+1}) ⊆ Vin ∪ covered C ∪ cl(overwr)", not bad1, bad1)
        )
        bad2 = sorted(nm for nm in qu_names(vmid_n) & fs if nm not in vout_n and nm not in coveredC)
        checks.append((f"qu(Vmid) ∩ (fv s_{i+1} ∪ fv s'_{i+1}) ⊆ Vout ∪ covered C", not bad2, bad2))

    for premise, ok, witness in checks:
        if not ok:
            raise RuleError(name, premise, witness)

    want_pre = P.inter([R, eqv_pred(vin)])
    want_post = P.inter([R, eqv_pred(vout)])
    if not pred_matches(j.pre, want_pre):
        raise RuleError(name, "precondition is R ∩ ≡Vin")
    if not pred_matches(j.post, want_post):
        raise RuleError(name, "postcondition is R ∩ ≡Vout")

    mid = P.inter([R, eqv_pred([d for d in vmid])])
    return [QrhlGoal(Judgment(mid, s[i], sp[i], mid)) for i in range(n)]


# ---------------------------------------------------------------------------
# Program replacement justified by denotational equivalence


def rule_rewrite_left(ctx: RuleContext, goal: Goal, new: Program) -> list:
    j = _expect_qrhl("RewriteLeft", goal)
    return [DeneqGoal(j.left, new), QrhlGoal(Judgment(j.pre, new, j.right, j.post))]


def rule_rewrite_right(ctx: RuleContext, goal: Goal, new: Program) -> list:
    j = _expect_qrhl("RewriteRight", goal)
    return [DeneqGoal(j.right, new), QrhlGoal(Judgment(j.pre, j.left, new, j.post))]


# ---------------------------------------------------------------------------
# Registry


RULES = {
    "Sym": rule_sym,
    "Conseq": rule_conseq,
    "Seq": rule_seq,
    "Case": rule_case,
    "Equal": rule_equal,
    "Frame": rule_frame,
    "QrhlElim": rule_qrhlelim,
    "QrhlElimEq": rule_qrhlelimeq,
    "QrhlElimEqNew": rule_qrhlelimeqnew,
    "TransSimple": rule_trans_simple,
    "Skip": rule_skip,
    "Assign1": rule_assign1,
    "Assign2": rule_assign2,
    "Sample1": rule_sample1,
    "Sample2": rule_sample2,
    "JointSample": rule_joint_sample,
    "If1": rule_if1,
    "If2": rule_if2,
    "JointIf": rule_joint_if,
    "While1": rule_while1,
    "While2": rule_while2,
    "JointWhile": rule_joint_while,
    "QInit1": rule_qinit1,
    "QInit2": rule_qinit2,
    "QApply1": rule_qapply1,
    "QApply2": rule_qapply2,
    "Measure1": rule_measure1,
    "Measure2": rule_measure2,
    "JointMeasureSimple": rule_joint_measure_simple,
    "RenameQrhl1": rule_rename1,
    "RenameQrhl2": rule_rename2,
    "RemoveLocal1": rule_remove_local1,
    "RemoveLocal2": rule_remove_local2,
    "JointQInitEq": rule_joint_qinit_eq,
    "JointQInitEq0": rule_joint_qinit_eq0,
    "JointRemoveLocal": rule_joint_remove_local,
    "JointRemoveLocal0": rule_joint_remove_local0,
    "EqVarChange": rule_eq_var_change,
    "Adversary": rule_adversary,
    "RewriteLeft": rule_rewrite_left,
    "RewriteRight": rule_rewrite_right,
}

RULE_NAMES = tuple(RULES)


def apply_rule(name: str, ctx: RuleContext, goal: Goal, **args) -> list:
    if name not in RULES:
        raise ValueError(f"unknown rule {name!r}")
    return RULES[name](ctx, goal, **args)
