"""The closed, first-order expression language.

Expressions depend only on classical variables and are evaluable at any
classical memory.  Quantum data (states, isometries, projective measurements)
and subprobability distributions enter as validated literals; parameterized
families like "H if x=1 else I" are expressed through Cond.

Every node carries its type; construction fails on ill-typed combinations, so
a built expression is well-typed by construction.  Structural equality is via
``expr_equal`` (dataclass ``eq`` is disabled because literals hold numpy
arrays).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .types import BOOL, Atom, Dist, FiniteType, Meas, VarDecl

# ---------------------------------------------------------------------------
# Expression types


@dataclass(frozen=True)
class TAtom:
    ft: FiniteType

    def __str__(self):
        return self.ft.name


@dataclass(frozen=True)
class TTuple:
    items: tuple  # of TAtom

    def __str__(self):
        return "(" + ", ".join(str(i) for i in self.items) + ")"


@dataclass(frozen=True)
class TDist:
    carrier: Union[TAtom, TTuple]

    def __str__(self):
        return f"dist[{self.carrier}]"


@dataclass(frozen=True)
class TVec:
    qtypes: tuple  # of FiniteType

    def __str__(self):
        return "vec[" + ", ".join(t.name for t in self.qtypes) + "]"

    @property
    def dim(self):
        d = 1
        for t in self.qtypes:
            d *= t.size
        return d


@dataclass(frozen=True)
class TOp:
    qtypes: tuple

    def __str__(self):
        return "op[" + ", ".join(t.name for t in self.qtypes) + "]"

    @property
    def dim(self):
        d = 1
        for t in self.qtypes:
            d *= t.size
        return d


@dataclass(frozen=True)
class TMeas:
    outcome: Union[TAtom, TTuple]
    qtypes: tuple

    def __str__(self):
        return f"meas[{self.outcome}; " + ", ".join(t.name for t in self.qtypes) + "]"

    @property
    def dim(self):
        d = 1
        for t in self.qtypes:
            d *= t.size
        return d


ExprType = Union[TAtom, TTuple, TDist, TVec, TOp, TMeas]

TBOOL = TAtom(BOOL)


def type_of_vars(decls) -> Union[TAtom, TTuple]:
    """typel of a variable tuple: single atom for one variable."""
    if len(decls) == 1:
        return TAtom(decls[0].ty)
    return TTuple(tuple(TAtom(d.ty) for d in decls))


class TypeError_(Exception):
    """Ill-typed expression or statement."""


# ---------------------------------------------------------------------------
# Expression nodes


@dataclass(frozen=True, eq=False)
class Expr:
    ty: ExprType

    def children(self) -> tuple:
        return ()


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: object  # Atom, tuple, Dist, Meas, or np.ndarray (vec/op)
    text: Optional[str] = None  # preferred surface form, e.g. "H", "uniform(bit)"


@dataclass(frozen=True, eq=False)
class VarRef(Expr):
    var: VarDecl
    idx: int = 0  # 0 = plain program variable, 1/2 = indexed copies


@dataclass(frozen=True, eq=False)
class TupleE(Expr):
    items: tuple

    def children(self):
        return self.items


@dataclass(frozen=True, eq=False)
class ProjE(Expr):
    tup: Expr
    i: int

    def children(self):
        return (self.tup,)


@dataclass(frozen=True, eq=False)
class EqE(Expr):
    a: Expr
    b: Expr

    def children(self):
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class NotE(Expr):
    a: Expr

    def children(self):
        return (self.a,)


@dataclass(frozen=True, eq=False)
class AndE(Expr):
    a: Expr
    b: Expr

    def children(self):
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class OrE(Expr):
    a: Expr
    b: Expr

    def children(self):
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class ArithE(Expr):
    """a OP b mod n over an integer-valued type whose values are 0..n-1."""

    op: str  # '+', '-', '*'
    a: Expr
    b: Expr
    mod: int

    def children(self):
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class CondE(Expr):
    cond: Expr
    then: Expr
    other: Expr

    def children(self):
        return (self.cond, self.then, self.other)


@dataclass(frozen=True, eq=False)
class TotalE(Expr):  # total(d): mass of d equals 1
    d: Expr

    def children(self):
        return (self.d,)


@dataclass(frozen=True, eq=False)
class SuppE(Expr):  # insupp(d, v): v has nonzero weight under d
    d: Expr
    v: Expr

    def children(self):
        return (self.d, self.v)


@dataclass(frozen=True, eq=False)
class MargE(Expr):  # marginal(d, i) of a distribution over tuples
    d: Expr
    i: int

    def children(self):
        return (self.d,)


@dataclass(frozen=True, eq=False)
class MeasAppE(Expr):  # measapp(M, z): the projector M assigns to outcome z
    m: Expr
    z: Expr

    def children(self):
        return (self.m, self.z)


@dataclass(frozen=True, eq=False)
class TotalMeasE(Expr):  # totalmeas(M): projectors sum to the identity
    m: Expr

    def children(self):
        return (self.m,)


# ---------------------------------------------------------------------------
# Smart constructors (validated literals and typed combinators)

NORM_TOL = 1e-9


def const(value: Atom, ft: FiniteType) -> Const:
    ft.index_of(value)
    return Const(TAtom(ft), value)


def true_() -> Const:
    return Const(TBOOL, True)


def false_() -> Const:
    return Const(TBOOL, False)


def var(decl: VarDecl, idx: int = 0) -> VarRef:
    if not decl.is_classical:
        raise TypeError_(f"expressions may only reference classical variables, not {decl.name}")
    return VarRef(TAtom(decl.ty), decl, idx)


def tuple_(items) -> TupleE:
    items = tuple(items)
    for it in items:
        if not isinstance(it.ty, TAtom):
            raise TypeError_("tuple components must be atoms")
    return TupleE(TTuple(tuple(i.ty for i in items)), items)


def proj(tup: Expr, i: int) -> ProjE:
    if not isinstance(tup.ty, TTuple):
        raise TypeError_("projection needs a tuple-typed expression")
    if not (0 <= i < len(tup.ty.items)):
        raise TypeError_("projection index out of range")
    return ProjE(tup.ty.items[i], tup, i)


def eq(a: Expr, b: Expr) -> EqE:
    if a.ty != b.ty:
        raise TypeError_(f"cannot compare {a.ty} with {b.ty}")
    return EqE(TBOOL, a, b)


def not_(a: Expr) -> NotE:
    if a.ty != TBOOL:
        raise TypeError_("negation needs a boolean")
    return NotE(TBOOL, a)


def and_(a: Expr, b: Expr) -> AndE:
    if a.ty != TBOOL or b.ty != TBOOL:
        raise TypeError_("conjunction needs booleans")
    return AndE(TBOOL, a, b)


def or_(a: Expr, b: Expr) -> OrE:
    if a.ty != TBOOL or b.ty != TBOOL:
        raise TypeError_("disjunction needs booleans")
    return OrE(TBOOL, a, b)


def conj_all(items) -> Expr:
    items = list(items)
    if not items:
        return true_()
    out = items[0]
    for it in items[1:]:
        out = and_(out, it)
    return out


def arith(op: str, a: Expr, b: Expr, mod: int) -> ArithE:
    if op not in ("+", "-", "*"):
        raise TypeError_(f"unknown arithmetic operator {op}")
    for e in (a, b):
        if not isinstance(e.ty, TAtom) or e.ty.ft.values != tuple(range(mod)):
            raise TypeError_(f"mod-{mod} arithmetic needs operands of type {{0..{mod - 1}}}")
    if a.ty != b.ty:
        raise TypeError_("arithmetic operands must share a type")
    return ArithE(a.ty, op, a, b, mod)


def cond(c: Expr, t: Expr, e: Expr) -> CondE:
    if c.ty != TBOOL:
        raise TypeError_("condition must be boolean")
    if t.ty != e.ty:
        raise TypeError_(f"conditional branches differ: {t.ty} vs {e.ty}")
    return CondE(t.ty, c, t, e)


def dist_lit(mapping, carrier: Union[TAtom, TTuple], text: Optional[str] = None) -> Const:
    d = Dist.of(tuple(mapping))
    for v, _ in d.weights:
        _check_value(v, carrier)
    return Const(TDist(carrier), d, text)


def uniform(ft: FiniteType) -> Const:
    w = Fraction(1, ft.size)
    return dist_lit([(v, w) for v in ft.values], TAtom(ft), text=f"uniform({ft.name})")


def point_dist(value: Atom, carrier: Union[TAtom, TTuple]) -> Const:
    return dist_lit([(value, Fraction(1))], carrier)


def vec_lit(amplitudes, qtypes, text: Optional[str] = None) -> Const:
    qtypes = tuple(qtypes)
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    ty = TVec(qtypes)
    if v.shape[0] != ty.dim:
        raise TypeError_(f"state literal has {v.shape[0]} amplitudes, expected {ty.dim}")
    if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
        raise TypeError_("state literal is not normalized")
    return Const(ty, v, text)


def ket(values, qtypes, text: Optional[str] = None) -> Const:
    """Computational-basis state |v1,...,vn> over the given quantum types."""
    qtypes = tuple(qtypes)
    values = tuple(values)
    if len(values) != len(qtypes):
        raise TypeError_("ket arity does not match the register tuple")
    idx = 0
    for val, t in zip(values, qtypes):
        idx = idx * t.size + t.index_of(val)
    dim = 1
    for t in qtypes:
        dim *= t.size
    v = np.zeros(dim, dtype=complex)
    v[idx] = 1.0
    return Const(TVec(qtypes), v, text or ("ket(" + ", ".join(repr(x) for x in values) + ")"))


def op_lit(matrix, qtypes, text: Optional[str] = None) -> Const:
    qtypes = tuple(qtypes)
    m = np.asarray(matrix, dtype=complex)
    ty = TOp(qtypes)
    if m.shape != (ty.dim, ty.dim):
        raise TypeError_(f"operator literal must be {ty.dim}x{ty.dim}")
    if not np.allclose(m.conj().T @ m, np.eye(ty.dim), atol=NORM_TOL):
        raise TypeError_("operator literal is not an isometry")
    return Const(ty, m, text)


def meas_lit(projectors, outcome: Union[TAtom, TTuple], qtypes, text: Optional[str] = None) -> Const:
    qtypes = tuple(qtypes)
    meas = Meas(dict(projectors))
    ty = TMeas(outcome, qtypes)
    if meas.dim != ty.dim:
        raise TypeError_("measurement dimension mismatch")
    for z in meas.outcomes():
        _check_value(z, outcome)
    meas.validate()
    return Const(ty, meas, text)


def comp_meas(qtypes, text: Optional[str] = None) -> Const:
    """Computational-basis measurement; outcomes are the basis value tuples."""
    qtypes = tuple(qtypes)
    dim = 1
    for t in qtypes:
        dim *= t.size
    outcome = TAtom(qtypes[0]) if len(qtypes) == 1 else TTuple(tuple(TAtom(t) for t in qtypes))
    projs = {}
    import itertools

    for i, combo in enumerate(itertools.product(*[t.values for t in qtypes])):
        p = np.zeros((dim, dim), dtype=complex)
        p[i, i] = 1.0
        projs[combo[0] if len(qtypes) == 1 else tuple(combo)] = p
    return meas_lit(projs, outcome, qtypes, text or "compmeas(" + ", ".join(t.name for t in qtypes) + ")")


def total(d: Expr) -> TotalE:
    if not isinstance(d.ty, TDist):
        raise TypeError_("total() needs a distribution")
    return TotalE(TBOOL, d)


def insupp(d: Expr, v: Expr) -> SuppE:
    if not isinstance(d.ty, TDist) or d.ty.carrier != v.ty:
        raise TypeError_("insupp() needs a distribution and a matching value")
    return SuppE(TBOOL, d, v)


def marginal(d: Expr, i: int) -> MargE:
    if not isinstance(d.ty, TDist) or not isinstance(d.ty.carrier, TTuple):
        raise TypeError_("marginal() needs a distribution over tuples")
    return MargE(TDist(d.ty.carrier.items[i]), d, i)


def measapp(m: Expr, z: Expr) -> MeasAppE:
    if not isinstance(m.ty, TMeas) or m.ty.outcome != z.ty:
        raise TypeError_("measapp() needs a measurement and a matching outcome")
    return MeasAppE(TOp(m.ty.qtypes), m, z)


def totalmeas(m: Expr) -> TotalMeasE:
    if not isinstance(m.ty, TMeas):
        raise TypeError_("totalmeas() needs a measurement")
    return TotalMeasE(TBOOL, m)


def _check_value(v, ty: Union[TAtom, TTuple]):
    if isinstance(ty, TAtom):
        ty.ft.index_of(v)
    else:
        if not isinstance(v, tuple) or len(v) != len(ty.items):
            raise TypeError_(f"{v!r} is not a value of {ty}")
        for x, t in zip(v, ty.items):
            t.ft.index_of(x)


# ---------------------------------------------------------------------------
# Free variables, evaluation, substitution, structural equality


def fv_expr(e: Expr) -> frozenset:
    """Free (classical) variables as (name, idx) pairs."""
    if isinstance(e, VarRef):
        return frozenset({(e.var.name, e.idx)})
    out = frozenset()
    for c in e.children():
        out |= fv_expr(c)
    return out


def eval_expr(e: Expr, env) -> object:
    """Evaluate at a classical memory.

    ``env`` maps (name, idx) pairs to values; use ``MemEnv`` helpers from the
    workspace module for cq-operator branches.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, VarRef):
        return env[(e.var.name, e.idx)]
    if isinstance(e, TupleE):
        return tuple(eval_expr(i, env) for i in e.items)
    if isinstance(e, ProjE):
        return eval_expr(e.tup, env)[e.i]
    if isinstance(e, EqE):
        return _values_equal(eval_expr(e.a, env), eval_expr(e.b, env))
    if isinstance(e, NotE):
        return not eval_expr(e.a, env)
    if isinstance(e, AndE):
        return bool(eval_expr(e.a, env)) and bool(eval_expr(e.b, env))
    if isinstance(e, OrE):
        return bool(eval_expr(e.a, env)) or bool(eval_expr(e.b, env))
    if isinstance(e, ArithE):
        a, b = eval_expr(e.a, env), eval_expr(e.b, env)
        if e.op == "+":
            return (a + b) % e.mod
        if e.op == "-":
            return (a - b) % e.mod
        return (a * b) % e.mod
    if isinstance(e, CondE):
        return eval_expr(e.then if eval_expr(e.cond, env) else e.other, env)
    if isinstance(e, TotalE):
        return eval_expr(e.d, env).total() == 1
    if isinstance(e, SuppE):
        return eval_expr(e.d, env).weight(eval_expr(e.v, env)) > 0
    if isinstance(e, MargE):
        return eval_expr(e.d, env).marginal(e.i)
    if isinstance(e, MeasAppE):
        return eval_expr(e.m, env).projector(eval_expr(e.z, env))
    if isinstance(e, TotalMeasE):
        return eval_expr(e.m, env).is_total()
    raise AssertionError(f"unhandled expression node {type(e).__name__}")


def _values_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return bool(np.allclose(a, b, atol=NORM_TOL))
    if isinstance(a, Meas) and isinstance(b, Meas):
        return a.approx_eq(b)
    return a == b


def map_expr(e: Expr, fn) -> Expr:
    """Rebuild ``e`` with ``fn`` applied to every node bottom-up."""
    if isinstance(e, (Const,)):
        return fn(e)
    if isinstance(e, VarRef):
        return fn(e)
    if isinstance(e, TupleE):
        return fn(TupleE(e.ty, tuple(map_expr(i, fn) for i in e.items)))
    if isinstance(e, ProjE):
        return fn(ProjE(e.ty, map_expr(e.tup, fn), e.i))
    if isinstance(e, EqE):
        return fn(EqE(e.ty, map_expr(e.a, fn), map_expr(e.b, fn)))
    if isinstance(e, NotE):
        return fn(NotE(e.ty, map_expr(e.a, fn)))
    if isinstance(e, AndE):
        return fn(AndE(e.ty, map_expr(e.a, fn), map_expr(e.b, fn)))
    if isinstance(e, OrE):
        return fn(OrE(e.ty, map_expr(e.a, fn), map_expr(e.b, fn)))
    if isinstance(e, ArithE):
        return fn(ArithE(e.ty, e.op, map_expr(e.a, fn), map_expr(e.b, fn), e.mod))
    if isinstance(e, CondE):
        return fn(CondE(e.ty, map_expr(e.cond, fn), map_expr(e.then, fn), map_expr(e.other, fn)))
    if isinstance(e, TotalE):
        return fn(TotalE(e.ty, map_expr(e.d, fn)))
    if isinstance(e, SuppE):
        return fn(SuppE(e.ty, map_expr(e.d, fn), map_expr(e.v, fn)))
    if isinstance(e, MargE):
        return fn(MargE(e.ty, map_expr(e.d, fn), e.i))
    if isinstance(e, MeasAppE):
        return fn(MeasAppE(e.ty, map_expr(e.m, fn), map_expr(e.z, fn)))
    if isinstance(e, TotalMeasE):
        return fn(TotalMeasE(e.ty, map_expr(e.m, fn)))
    raise AssertionError(f"unhandled expression node {type(e).__name__}")


def rename_expr_vars(e: Expr, mapping) -> Expr:
    """Replace variable declarations: mapping maps VarDecl -> VarDecl (same idx)."""

    def fn(node):
        if isinstance(node, VarRef) and node.var in mapping:
            nd = mapping[node.var]
            return VarRef(TAtom(nd.ty), nd, node.idx)
        return node

    return map_expr(e, fn)


def index_expr(e: Expr, idx: int) -> Expr:
    """Shift every plain (idx=0) variable reference to the given side index."""

    def fn(node):
        if isinstance(node, VarRef) and node.idx == 0:
            return VarRef(node.ty, node.var, idx)
        return node

    return map_expr(e, fn)


def subst_expr(e: Expr, target_name: str, target_idx: int, replacement: Expr) -> Expr:
    def fn(node):
        if isinstance(node, VarRef) and node.var.name == target_name and node.idx == target_idx:
            if node.ty != replacement.ty:
                raise TypeError_("substitution changes the expression type")
            return replacement
        return node

    return map_expr(e, fn)


def expr_equal(a: Expr, b: Expr) -> bool:
    if type(a) is not type(b) or a.ty != b.ty:
        return False
    if isinstance(a, Const):
        va, vb = a.value, b.value
        if isinstance(va, np.ndarray):
            return isinstance(vb, np.ndarray) and va.shape == vb.shape and bool(np.array_equal(va, vb))
        if isinstance(va, Meas):
            return isinstance(vb, Meas) and set(va.projectors) == set(vb.projectors) and all(
                np.array_equal(va.projectors[k], vb.projectors[k]) for k in va.projectors
            )
        return va == vb
    if isinstance(a, VarRef):
        return a.var == b.var and a.idx == b.idx
    if isinstance(a, ProjE):
        return a.i == b.i and expr_equal(a.tup, b.tup)
    if isinstance(a, ArithE):
        return a.op == b.op and a.mod == b.mod and expr_equal(a.a, b.a) and expr_equal(a.b, b.b)
    if isinstance(a, MargE):
        return a.i == b.i and expr_equal(a.d, b.d)
    ca, cb = a.children(), b.children()
    return len(ca) == len(cb) and all(expr_equal(x, y) for x, y in zip(ca, cb))
