"""Quantum predicates: expressions that evaluate to closed subspaces.

A predicate over the doubled workspace is evaluated at a pair of classical
memories and yields a subspace of the doubled quantum factor.  Satisfaction
of a cq-operator is support inclusion per classical branch.

The quantum equality of two registers is the fixed space of the register
swap; the extended form conjugates by (unitary) operator expressions before
swapping.  Non-square or non-unitary operator arguments are rejected at
evaluation time rather than given an ad-hoc meaning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ast as A
from . import expr as ex
from .expr import Expr
from .linalg import Subspace, embed_operator, fixed_space, front_permutation, support_space, swap_operator
from .types import VarDecl
from .workspace import DoubledWorkspace, Workspace

SUBSPACE_TOL = 1e-9
SUPPORT_FLOOR = 1e-10


@dataclass(frozen=True)
class QVar:
    """A (possibly indexed) quantum register occurrence inside a predicate."""

    var: VarDecl
    idx: int  # 1 or 2 in relational predicates

    @property
    def name(self):
        return self.var.name

    def pretty(self) -> str:
        return f"{self.var.name}{self.idx if self.idx else ''}"


@dataclass(frozen=True, eq=False)
class PredExpr:
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True, eq=False)
class PTop(PredExpr):
    pass


@dataclass(frozen=True, eq=False)
class PBottom(PredExpr):
    pass


@dataclass(frozen=True, eq=False)
class PCL(PredExpr):
    e: Expr  # boolean over indexed classical variables


@dataclass(frozen=True, eq=False)
class PInter(PredExpr):
    items: tuple

    def children(self):
        return self.items


@dataclass(frozen=True, eq=False)
class PSum(PredExpr):
    items: tuple

    def children(self):
        return self.items


@dataclass(frozen=True, eq=False)
class POrtho(PredExpr):
    p: PredExpr

    def children(self):
        return (self.p,)


@dataclass(frozen=True, eq=False)
class PQuantEq(PredExpr):
    """Extended quantum equality  (opA) X  ==q  (opB) Y; ops default to id."""

    X: tuple  # of QVar
    Y: tuple
    opA: Optional[Expr] = None
    opB: Optional[Expr] = None


@dataclass(frozen=True, eq=False)
class PQEqState(PredExpr):
    """Q =q psi: the registers Q are in the pure state psi."""

    Q: tuple
    psi: Expr


@dataclass(frozen=True, eq=False)
class PLift(PredExpr):
    """Image of an operator expression lifted to the registers Q."""

    op: Expr
    Q: tuple


@dataclass(frozen=True, eq=False)
class PImage(PredExpr):
    """(op on Q) applied to a predicate's subspace (optionally the adjoint)."""

    op: Expr
    Q: tuple
    p: PredExpr
    adjoint: bool = False

    def children(self):
        return (self.p,)


@dataclass(frozen=True, eq=False)
class PSpaceAt(PredExpr):
    """A at (psi on Q): the 'division' used by the one-sided qinit rule.

    Evaluates to {phi over the complement of Q : psi (x) phi in A} tensored
    with the full space on Q.
    """

    p: PredExpr
    psi: Expr
    Q: tuple

    def children(self):
        return (self.p,)


# ---------------------------------------------------------------------------
# Constructors / sugar


def inter(items) -> PredExpr:
    flat: list = []
    for it in items:
        if isinstance(it, PInter):
            flat.extend(it.items)
        elif isinstance(it, PTop):
            continue
        else:
            flat.append(it)
    if not flat:
        return PTop()
    if len(flat) == 1:
        return flat[0]
    return PInter(tuple(flat))


def psum(items) -> PredExpr:
    flat: list = []
    for it in items:
        if isinstance(it, PSum):
            flat.extend(it.items)
        elif isinstance(it, PBottom):
            continue
        else:
            flat.append(it)
    if not flat:
        return PBottom()
    if len(flat) == 1:
        return flat[0]
    return PSum(tuple(flat))


def quanteq(X, Y, opA: Optional[Expr] = None, opB: Optional[Expr] = None) -> PQuantEq:
    X, Y = tuple(X), tuple(Y)
    if len(X) != len(Y) or any(a.var.ty != b.var.ty for a, b in zip(X, Y)):
        raise ex.TypeError_("quantum equality needs registers of identical tuple type")
    if {q for q in X} & {q for q in Y}:
        raise ex.TypeError_("quantum equality registers must be disjoint")
    return PQuantEq(X, Y, opA, opB)


def eq_vars(decls, ws_aux: Optional[str] = None) -> PredExpr:
    """The mixed-variable equality for a set of unindexed variables.

    Desugars to qu(V)_1 ==q qu(V)_2 intersected with CL(cl(V)_1 = cl(V)_2);
    an aux-infinite marker variable in V is ignored (it has no finite type).
    """
    decls = [d for d in decls]
    qu = [d for d in decls if isinstance(d, VarDecl) and d.is_quantum]
    cl = [d for d in decls if isinstance(d, VarDecl) and d.is_classical]
    parts: list = []
    if qu:
        parts.append(quanteq(tuple(QVar(d, 1) for d in qu), tuple(QVar(d, 2) for d in qu)))
    if cl:
        eqs = [ex.eq(ex.var(d, 1), ex.var(d, 2)) for d in cl]
        parts.append(PCL(ex.conj_all(eqs)))
    return inter(parts)


# ---------------------------------------------------------------------------
# Free variables and substitution


def fv_pred(p: PredExpr) -> frozenset:
    """Free variables as (name, idx) pairs, classical and quantum alike."""
    if isinstance(p, (PTop, PBottom)):
        return frozenset()
    if isinstance(p, PCL):
        return ex.fv_expr(p.e)
    if isinstance(p, (PInter, PSum)):
        out = frozenset()
        for c in p.items:
            out |= fv_pred(c)
        return out
    if isinstance(p, POrtho):
        return fv_pred(p.p)
    if isinstance(p, PQuantEq):
        out = frozenset((q.name, q.idx) for q in p.X + p.Y)
        if p.opA is not None:
            out |= ex.fv_expr(p.opA)
        if p.opB is not None:
            out |= ex.fv_expr(p.opB)
        return out
    if isinstance(p, PQEqState):
        return frozenset((q.name, q.idx) for q in p.Q) | ex.fv_expr(p.psi)
    if isinstance(p, PLift):
        return frozenset((q.name, q.idx) for q in p.Q) | ex.fv_expr(p.op)
    if isinstance(p, PImage):
        return frozenset((q.name, q.idx) for q in p.Q) | ex.fv_expr(p.op) | fv_pred(p.p)
    if isinstance(p, PSpaceAt):
        return frozenset((q.name, q.idx) for q in p.Q) | ex.fv_expr(p.psi) | fv_pred(p.p)
    raise AssertionError(type(p))


def fv_pred_base(p: PredExpr) -> frozenset:
    """Base names of the free variables, indices dropped."""
    return frozenset(n for n, _ in fv_pred(p))


def map_pred(p: PredExpr, expr_fn, qvar_fn) -> PredExpr:
    """Rebuild with expr_fn over embedded expressions and qvar_fn over QVars."""
    if isinstance(p, (PTop, PBottom)):
        return p
    if isinstance(p, PCL):
        return PCL(expr_fn(p.e))
    if isinstance(p, PInter):
        return PInter(tuple(map_pred(c, expr_fn, qvar_fn) for c in p.items))
    if isinstance(p, PSum):
        return PSum(tuple(map_pred(c, expr_fn, qvar_fn) for c in p.items))
    if isinstance(p, POrtho):
        return POrtho(map_pred(p.p, expr_fn, qvar_fn))
    if isinstance(p, PQuantEq):
        return PQuantEq(
            tuple(qvar_fn(q) for q in p.X),
            tuple(qvar_fn(q) for q in p.Y),
            None if p.opA is None else expr_fn(p.opA),
            None if p.opB is None else expr_fn(p.opB),
        )
    if isinstance(p, PQEqState):
        return PQEqState(tuple(qvar_fn(q) for q in p.Q), expr_fn(p.psi))
    if isinstance(p, PLift):
        return PLift(expr_fn(p.op), tuple(qvar_fn(q) for q in p.Q))
    if isinstance(p, PImage):
        return PImage(expr_fn(p.op), tuple(qvar_fn(q) for q in p.Q), map_pred(p.p, expr_fn, qvar_fn), p.adjoint)
    if isinstance(p, PSpaceAt):
        return PSpaceAt(map_pred(p.p, expr_fn, qvar_fn), expr_fn(p.psi), tuple(qvar_fn(q) for q in p.Q))
    raise AssertionError(type(p))


def swap_indices(p: PredExpr) -> PredExpr:
    """The built-in symmetry substitution: swap every index 1 <-> 2."""

    def efn(e):
        def fn(node):
            if isinstance(node, ex.VarRef) and node.idx in (1, 2):
                return ex.VarRef(node.ty, node.var, 3 - node.idx)
            return node

        return ex.map_expr(e, fn)

    def qfn(q: QVar):
        return QVar(q.var, 3 - q.idx) if q.idx in (1, 2) else q

    return map_pred(p, efn, qfn)


def rename_indexed(p: PredExpr, mapping: dict, idx: int) -> PredExpr:
    """Rename base variables on one side only: mapping is VarDecl -> VarDecl."""

    def efn(e):
        def fn(node):
            if isinstance(node, ex.VarRef) and node.idx == idx and node.var in mapping:
                nd = mapping[node.var]
                return ex.VarRef(ex.TAtom(nd.ty), nd, node.idx)
            return node

        return ex.map_expr(e, fn)

    def qfn(q: QVar):
        if q.idx == idx and q.var in mapping:
            return QVar(mapping[q.var], q.idx)
        return q

    return map_pred(p, efn, qfn)


def subst_classical(p: PredExpr, name: str, idx: int, replacement: Expr) -> PredExpr:
    def efn(e):
        return ex.subst_expr(e, name, idx, replacement)

    return map_pred(p, efn, lambda q: q)


def pred_equal(a: PredExpr, b: PredExpr) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (PTop, PBottom)):
        return True
    if isinstance(a, PCL):
        return ex.expr_equal(a.e, b.e)
    if isinstance(a, (PInter, PSum)):
        return len(a.items) == len(b.items) and all(pred_equal(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, POrtho):
        return pred_equal(a.p, b.p)
    if isinstance(a, PQuantEq):
        ops_eq = (a.opA is None) == (b.opA is None) and (a.opB is None) == (b.opB is None)
        if ops_eq and a.opA is not None:
            ops_eq = ex.expr_equal(a.opA, b.opA)
        if ops_eq and a.opB is not None:
            ops_eq = ex.expr_equal(a.opB, b.opB)
        return a.X == b.X and a.Y == b.Y and ops_eq
    if isinstance(a, PQEqState):
        return a.Q == b.Q and ex.expr_equal(a.psi, b.psi)
    if isinstance(a, PLift):
        return a.Q == b.Q and ex.expr_equal(a.op, b.op)
    if isinstance(a, PImage):
        return a.Q == b.Q and a.adjoint == b.adjoint and ex.expr_equal(a.op, b.op) and pred_equal(a.p, b.p)
    if isinstance(a, PSpaceAt):
        return a.Q == b.Q and ex.expr_equal(a.psi, b.psi) and pred_equal(a.p, b.p)
    raise AssertionError(type(a))


# ---------------------------------------------------------------------------
# Evaluation


def _qslots(dws, qs: Sequence[QVar]) -> list:
    return [dws.quantum_pos(q.name, q.idx) for q in qs]


def quanteq_space(
    dws,
    X: Sequence[QVar],
    Y: Sequence[QVar],
    opA: Optional[np.ndarray] = None,
    opB: Optional[np.ndarray] = None,
) -> Subspace:
    """Fixed space of swap(X,Y) after conjugating with the operator arguments.

    With identity operators this is exactly the swap-invariant subspace.  The
    operators must be unitary: isometric-but-not-unitary arguments have no
    agreed-on membership semantics here and are rejected.
    """
    xs, ys = _qslots(dws, X), _qslots(dws, Y)
    dims = dws.qdims
    w = swap_operator(dims, xs, ys)
    dsub = 1
    for s in xs:
        dsub *= dims[s]
    for name, op, slots in (("left", opA, xs), ("right", opB, ys)):
        if op is None:
            continue
        if op.shape != (dsub, dsub) or not np.allclose(op.conj().T @ op, np.eye(dsub), atol=SUBSPACE_TOL) or not np.allclose(
            op @ op.conj().T, np.eye(dsub), atol=SUBSPACE_TOL
        ):
            raise ValueError(f"{name} operator argument of a quantum equality must be unitary on the register")
    a = opA if opA is not None else np.eye(dsub, dtype=complex)
    b = opB if opB is not None else np.eye(dsub, dtype=complex)
    on_x = embed_operator(b.conj().T @ a, xs, dims)
    on_y = embed_operator(a.conj().T @ b, ys, dims)
    return fixed_space(w @ on_x @ on_y)


def _lift_subspace(dws, sub_basis: np.ndarray, slots: list) -> Subspace:
    """span(basis on slots) tensor full space on the rest, in dws layout."""
    dims = dws.qdims
    total = dws.qdim
    dsub = 1
    for s in slots:
        dsub *= dims[s]
    drest = total // dsub
    perm = front_permutation(dims, slots)
    cols = np.kron(sub_basis, np.eye(drest, dtype=complex))
    out = np.zeros((total, cols.shape[1]), dtype=complex)
    out[perm, :] = cols
    return Subspace(out) if cols.shape[1] else Subspace.bottom(total)


def eval_pred(p: PredExpr, mems: tuple, space) -> Subspace:
    """Evaluate at classical memories: (m1, m2) over a doubled space, (m,) single."""
    env = space.env(*mems)
    return _eval(p, env, space)


def _eval(p: PredExpr, env, dws) -> Subspace:
    dim = dws.qdim
    if isinstance(p, PTop):
        return Subspace.top(dim)
    if isinstance(p, PBottom):
        return Subspace.bottom(dim)
    if isinstance(p, PCL):
        return Subspace.top(dim) if bool(ex.eval_expr(p.e, env)) else Subspace.bottom(dim)
    if isinstance(p, PInter):
        out = _eval(p.items[0], env, dws)
        for c in p.items[1:]:
            if out.dim == 0:
                return out
            out = out.inter(_eval(c, env, dws))
        return out
    if isinstance(p, PSum):
        out = _eval(p.items[0], env, dws)
        for c in p.items[1:]:
            out = out.sum(_eval(c, env, dws))
        return out
    if isinstance(p, POrtho):
        return _eval(p.p, env, dws).ortho()
    if isinstance(p, PQuantEq):
        a = None if p.opA is None else np.asarray(ex.eval_expr(p.opA, env), dtype=complex)
        b = None if p.opB is None else np.asarray(ex.eval_expr(p.opB, env), dtype=complex)
        return quanteq_space(dws, p.X, p.Y, a, b)
    if isinstance(p, PQEqState):
        psi = np.asarray(ex.eval_expr(p.psi, env), dtype=complex).reshape(-1, 1)
        return _lift_subspace(dws, psi, _qslots(dws, p.Q))
    if isinstance(p, PLift):
        op = np.asarray(ex.eval_expr(p.op, env), dtype=complex)
        image = Subspace._orthonormalize(op)
        return _lift_subspace(dws, image.basis, _qslots(dws, p.Q))
    if isinstance(p, PImage):
        inner_space = _eval(p.p, env, dws)
        op = np.asarray(ex.eval_expr(p.op, env), dtype=complex)
        full = embed_operator(op, _qslots(dws, p.Q), dws.qdims)
        if p.adjoint:
            full = full.conj().T
        return inner_space.apply(full)
    if isinstance(p, PSpaceAt):
        return _eval_spaceat(p, env, dws)
    raise AssertionError(type(p))


def _eval_spaceat(p: PSpaceAt, env, dws) -> Subspace:
    space = _eval(p.p, env, dws)
    psi = np.asarray(ex.eval_expr(p.psi, env), dtype=complex).reshape(-1)
    slots = _qslots(dws, p.Q)
    dims = dws.qdims
    total = dws.qdim
    dsub = psi.shape[0]
    drest = total // dsub
    perm = front_permutation(dims, slots)
    # Columns psi (x) e_i in original layout, for e_i ranging over the complement.
    probe = np.zeros((total, drest), dtype=complex)
    front = np.kron(psi.reshape(-1, 1), np.eye(drest, dtype=complex))
    probe[perm, :] = front
    if space.dim == 0:
        kern = Subspace.bottom(drest)
    else:
        resid = probe - space.projector() @ probe
        from .linalg import null_space

        kern = null_space(resid)
    if kern.dim == 0:
        return Subspace.bottom(total)
    return _lift_subspace_rest(dws, kern.basis, slots)


def _lift_subspace_rest(dws, rest_basis: np.ndarray, slots: list) -> Subspace:
    """span(rest basis on the complement) tensor full space on ``slots``."""
    dims = dws.qdims
    total = dws.qdim
    dsub = 1
    for s in slots:
        dsub *= dims[s]
    perm = front_permutation(dims, slots)
    cols = np.kron(np.eye(dsub, dtype=complex), rest_basis)
    out = np.zeros((total, cols.shape[1]), dtype=complex)
    out[perm, :] = cols
    return Subspace(out) if cols.shape[1] else Subspace.bottom(total)


def subspace_leq(a: Subspace, b: Subspace, tol: float = SUBSPACE_TOL) -> bool:
    return a.leq(b, tol)


def satisfies(rho, p: PredExpr, space, tol: float = SUPPORT_FLOOR) -> bool:
    """Support inclusion per classical branch of a cq-operator."""
    for mem, mat in rho.branches.items():
        mems = space.split_branch_key(mem)
        supp = support_space(mat, tol)
        if not supp.leq(eval_pred(p, mems, space), SUBSPACE_TOL):
            return False
    return True


def pred_inclusion_holds(a: PredExpr, b: PredExpr, space, tol: float = SUBSPACE_TOL):
    """Check a <= b at every classical memory tuple; returns (ok, witness)."""
    for mems in space.memory_pairs():
        sa = eval_pred(a, mems, space)
        sb = eval_pred(b, mems, space)
        if not sa.leq(sb, tol):
            return False, mems
    return True, None


# ---------------------------------------------------------------------------
# Printing


def print_pred(p: PredExpr) -> str:
    if isinstance(p, PTop):
        return "top"
    if isinstance(p, PBottom):
        return "bot"
    if isinstance(p, PCL):
        return "CL[" + A.print_expr(p.e) + "]"
    if isinstance(p, PInter):
        return " /\\ ".join(_paren(c) for c in p.items)
    if isinstance(p, PSum):
        return " + ".join(_paren(c) for c in p.items)
    if isinstance(p, POrtho):
        return "orth(" + print_pred(p.p) + ")"
    if isinstance(p, PQuantEq):
        xs = " ".join(q.pretty() for q in p.X)
        ys = " ".join(q.pretty() for q in p.Y)
        if p.opA is None and p.opB is None:
            return f"qeq({xs}, {ys})"
        a = A.print_expr(p.opA) if p.opA is not None else "id"
        b = A.print_expr(p.opB) if p.opB is not None else "id"
        return f"qeq({a} : {xs}, {b} : {ys})"
    if isinstance(p, PQEqState):
        return "instate(" + " ".join(q.pretty() for q in p.Q) + ", " + A.print_expr(p.psi) + ")"
    if isinstance(p, PLift):
        return "lift(" + A.print_expr(p.op) + ", " + " ".join(q.pretty() for q in p.Q) + ")"
    if isinstance(p, PImage):
        name = "imgadj" if p.adjoint else "img"
        return f"{name}(" + A.print_expr(p.op) + ", " + " ".join(q.pretty() for q in p.Q) + ", " + print_pred(p.p) + ")"
    if isinstance(p, PSpaceAt):
        return "spaceat(" + print_pred(p.p) + ", " + A.print_expr(p.psi) + ", " + " ".join(q.pretty() for q in p.Q) + ")"
    raise AssertionError(type(p))


def _paren(p: PredExpr) -> str:
    s = print_pred(p)
    if isinstance(p, (PInter, PSum)):
        return "(" + s + ")"
    return s
