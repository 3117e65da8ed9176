"""Program and context ASTs for the quantum while-language with `local`.

A Context is a Program that may contain numbered holes.  `Seq` is n-ary and
flattened (the concrete syntax is left-associative, so the n-ary node is the
left fold of the binary composition).  `local v; c` binds weaker than `;`:
the parser scopes an unbraced local to the end of the enclosing block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from . import expr as ex
from .expr import Expr, TAtom, TBOOL, TDist, TMeas, TOp, TTuple, TVec
from .types import VarDecl


@dataclass(frozen=True, eq=False)
class Program:
    pass


@dataclass(frozen=True, eq=False)
class Skip(Program):
    pass


@dataclass(frozen=True, eq=False)
class Assign(Program):
    xs: tuple  # classical VarDecls, distinct
    e: Expr


@dataclass(frozen=True, eq=False)
class Sample(Program):
    xs: tuple
    e: Expr


@dataclass(frozen=True, eq=False)
class If(Program):
    e: Expr
    then: Program
    other: Program


@dataclass(frozen=True, eq=False)
class While(Program):
    e: Expr
    body: Program


@dataclass(frozen=True, eq=False)
class Seq(Program):
    items: tuple  # >= 2 programs, none of them Seq


@dataclass(frozen=True, eq=False)
class QInit(Program):
    qs: tuple  # quantum VarDecls, distinct
    e: Expr


@dataclass(frozen=True, eq=False)
class QApply(Program):
    e: Expr
    qs: tuple


@dataclass(frozen=True, eq=False)
class Measure(Program):
    xs: tuple
    qs: tuple
    e: Expr


@dataclass(frozen=True, eq=False)
class Local(Program):
    v: VarDecl
    body: Program


@dataclass(frozen=True, eq=False)
class Hole(Program):
    i: int


def seq(items: Iterable[Program]) -> Program:
    """Flattening sequence constructor; [] is skip, [p] is p."""
    flat: list = []
    for it in items:
        if isinstance(it, Seq):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return Skip()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def local(vs, body: Program) -> Program:
    """local v1 (local v2 (... body)) for a variable list."""
    out = body
    for v in reversed(list(vs)):
        out = Local(v, out)
    return out


def flatten(p: Program) -> list:
    """Statement list view: Seq is splatted, Skip is the empty list."""
    if isinstance(p, Seq):
        out = []
        for it in p.items:
            out.extend(flatten(it))
        return out
    if isinstance(p, Skip):
        return []
    return [p]


def children(p: Program) -> tuple:
    if isinstance(p, If):
        return (p.then, p.other)
    if isinstance(p, While):
        return (p.body,)
    if isinstance(p, Seq):
        return p.items
    if isinstance(p, Local):
        return (p.body,)
    return ()


def is_program(p: Program) -> bool:
    """True iff p contains no hole."""
    if isinstance(p, Hole):
        return False
    return all(is_program(c) for c in children(p))


def hole_indices(p: Program) -> frozenset:
    if isinstance(p, Hole):
        return frozenset({p.i})
    out = frozenset()
    for c in children(p):
        out |= hole_indices(c)
    return out


def instantiate(ctx: Program, substitutions) -> Program:
    """C[s1,...,sn]: replace every hole i by substitutions[i].

    Purely textual: no renaming of local binders, so instantiating under
    `local v` captures free occurrences of v in the plugged program.
    """
    subs = dict(substitutions)
    missing = hole_indices(ctx) - set(subs)
    if missing:
        raise ValueError(f"no instantiation for hole(s) {sorted(missing)}")

    def go(p: Program) -> Program:
        if isinstance(p, Hole):
            return subs[p.i]
        if isinstance(p, If):
            return If(p.e, go(p.then), go(p.other))
        if isinstance(p, While):
            return While(p.e, go(p.body))
        if isinstance(p, Seq):
            return seq([go(i) for i in p.items])
        if isinstance(p, Local):
            return Local(p.v, go(p.body))
        return p

    return go(ctx)


# ---------------------------------------------------------------------------
# Well-typedness (the checker is total: it returns violations, never raises)


@dataclass(frozen=True)
class TypeViolation:
    path: tuple
    rule: str
    detail: str

    def __str__(self):
        loc = "/".join(str(s) for s in self.path) or "(top)"
        return f"{loc}: {self.rule}: {self.detail}"


def check_well_typed(p: Program) -> list:
    """All well-typedness violations; the empty list is the evidence."""
    out: list = []
    _check(p, (), out)
    return out


def _distinct(decls) -> bool:
    return len({d.name for d in decls}) == len(decls)


def _check(p: Program, path: tuple, out: list) -> None:
    if isinstance(p, (Skip, Hole)):
        return
    if isinstance(p, Assign):
        want = ex.type_of_vars(p.xs)
        if not _distinct(p.xs):
            out.append(TypeViolation(path, "assign", "assigned variables must be distinct"))
        if any(not x.is_classical for x in p.xs):
            out.append(TypeViolation(path, "assign", "assignment targets must be classical"))
        if p.e.ty != want:
            out.append(TypeViolation(path, "assign", f"expression type {p.e.ty} is not a subset of {want}"))
        return
    if isinstance(p, Sample):
        want = ex.type_of_vars(p.xs)
        if not _distinct(p.xs):
            out.append(TypeViolation(path, "sample", "sampled variables must be distinct"))
        if any(not x.is_classical for x in p.xs):
            out.append(TypeViolation(path, "sample", "sampling targets must be classical"))
        if not (isinstance(p.e.ty, TDist) and p.e.ty.carrier == want):
            out.append(
                TypeViolation(
                    path, "sample", f"expression type {p.e.ty} is not a subset of the subprobability distributions on {want}"
                )
            )
        return
    if isinstance(p, If):
        if p.e.ty != TBOOL:
            out.append(TypeViolation(path, "if", f"guard has type {p.e.ty}, not a subset of {{true,false}}"))
        _check(p.then, path + (0,), out)
        _check(p.other, path + (1,), out)
        return
    if isinstance(p, While):
        if p.e.ty != TBOOL:
            out.append(TypeViolation(path, "while", f"guard has type {p.e.ty}, not a subset of {{true,false}}"))
        _check(p.body, path + (0,), out)
        return
    if isinstance(p, Seq):
        for i, c in enumerate(p.items):
            _check(c, path + (i,), out)
        return
    if isinstance(p, QInit):
        want = TVec(tuple(q.ty for q in p.qs))
        if not _distinct(p.qs):
            out.append(TypeViolation(path, "qinit", "initialized registers must be distinct"))
        if any(not q.is_quantum for q in p.qs):
            out.append(TypeViolation(path, "qinit", "initialized registers must be quantum"))
        if p.e.ty != want:
            out.append(TypeViolation(path, "qinit", f"expression type {p.e.ty} is not a set of unit vectors in {want}"))
        return
    if isinstance(p, QApply):
        want = TOp(tuple(q.ty for q in p.qs))
        if not _distinct(p.qs):
            out.append(TypeViolation(path, "qapply", "target registers must be distinct"))
        if any(not q.is_quantum for q in p.qs):
            out.append(TypeViolation(path, "qapply", "target registers must be quantum"))
        if p.e.ty != want:
            out.append(TypeViolation(path, "qapply", f"expression type {p.e.ty} is not a set of isometries on {want}"))
        return
    if isinstance(p, Measure):
        if not _distinct(p.xs) or not _distinct(p.qs):
            out.append(TypeViolation(path, "measure", "measured registers and outcome variables must be distinct"))
        if any(not x.is_classical for x in p.xs) or any(not q.is_quantum for q in p.qs):
            out.append(TypeViolation(path, "measure", "outcomes are classical, measured registers are quantum"))
        want = TMeas(ex.type_of_vars(p.xs), tuple(q.ty for q in p.qs))
        if p.e.ty != want:
            out.append(
                TypeViolation(
                    path, "measure", f"expression type {p.e.ty} is not a set of projective measurements {want}"
                )
            )
        return
    if isinstance(p, Local):
        _check(p.body, path + (0,), out)
        return
    raise AssertionError(f"unhandled node {type(p).__name__}")


# ---------------------------------------------------------------------------
# Structural equality and printing


def program_equal(a: Program, b: Program) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (Skip,)):
        return True
    if isinstance(a, Hole):
        return a.i == b.i
    if isinstance(a, (Assign, Sample)):
        return a.xs == b.xs and ex.expr_equal(a.e, b.e)
    if isinstance(a, If):
        return ex.expr_equal(a.e, b.e) and program_equal(a.then, b.then) and program_equal(a.other, b.other)
    if isinstance(a, While):
        return ex.expr_equal(a.e, b.e) and program_equal(a.body, b.body)
    if isinstance(a, Seq):
        return len(a.items) == len(b.items) and all(program_equal(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, QInit):
        return a.qs == b.qs and ex.expr_equal(a.e, b.e)
    if isinstance(a, QApply):
        return a.qs == b.qs and ex.expr_equal(a.e, b.e)
    if isinstance(a, Measure):
        return a.xs == b.xs and a.qs == b.qs and ex.expr_equal(a.e, b.e)
    if isinstance(a, Local):
        return a.v == b.v and program_equal(a.body, b.body)
    raise AssertionError(type(a))


def print_expr(e: Expr) -> str:
    if isinstance(e, ex.Const):
        if e.text is not None:
            return e.text
        v = e.value
        if isinstance(e.ty, TAtom):
            if v is True:
                return "true"
            if v is False:
                return "false"
            return repr(v) if isinstance(v, str) else str(v)
        if isinstance(e.ty, TTuple):
            return "(" + ", ".join(str(x) for x in v) + ")"
        if isinstance(e.ty, TDist):
            parts = ", ".join(f"{_atom_str(val)}: {w}" for val, w in v.weights)
            return "dist{" + parts + "}"
        if isinstance(e.ty, TVec):
            return "vec[" + ", ".join(_cnum(c) for c in v) + "]"
        if isinstance(e.ty, TOp):
            rows = "; ".join(", ".join(_cnum(c) for c in row) for row in v)
            return "op[" + rows + "]"
        return f"<{e.ty}>"
    if isinstance(e, ex.VarRef):
        return e.var.name + (str(e.idx) if e.idx else "")
    if isinstance(e, ex.TupleE):
        return "(" + ", ".join(print_expr(i) for i in e.items) + ")"
    if isinstance(e, ex.ProjE):
        return f"proj({print_expr(e.tup)}, {e.i})"
    if isinstance(e, ex.EqE):
        return f"({print_expr(e.a)} == {print_expr(e.b)})"
    if isinstance(e, ex.NotE):
        return f"!{print_expr(e.a)}"
    if isinstance(e, ex.AndE):
        return f"({print_expr(e.a)} && {print_expr(e.b)})"
    if isinstance(e, ex.OrE):
        return f"({print_expr(e.a)} || {print_expr(e.b)})"
    if isinstance(e, ex.ArithE):
        return f"({print_expr(e.a)} {e.op} {print_expr(e.b)} % {e.mod})"
    if isinstance(e, ex.CondE):
        return f"({print_expr(e.cond)} ? {print_expr(e.then)} : {print_expr(e.other)})"
    if isinstance(e, ex.TotalE):
        return f"total({print_expr(e.d)})"
    if isinstance(e, ex.SuppE):
        return f"insupp({print_expr(e.d)}, {print_expr(e.v)})"
    if isinstance(e, ex.MargE):
        return f"marginal({print_expr(e.d)}, {e.i})"
    if isinstance(e, ex.MeasAppE):
        return f"measapp({print_expr(e.m)}, {print_expr(e.z)})"
    if isinstance(e, ex.TotalMeasE):
        return f"totalmeas({print_expr(e.m)})"
    raise AssertionError(type(e))


def _atom_str(v) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, tuple):
        return "(" + ", ".join(_atom_str(x) for x in v) + ")"
    return repr(v) if isinstance(v, str) else str(v)


def _cnum(c: complex) -> str:
    re, im = float(c.real), float(c.imag)
    if im == 0:
        return repr(re)
    if re == 0:
        return f"{im!r}i"
    sign = "+" if im >= 0 else "-"
    return f"{re!r}{sign}{abs(im)!r}i"


def print_program(p: Program, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(p, Skip):
        return pad + "skip"
    if isinstance(p, Assign):
        return pad + ", ".join(x.name for x in p.xs) + " <- " + print_expr(p.e)
    if isinstance(p, Sample):
        return pad + ", ".join(x.name for x in p.xs) + " <$ " + print_expr(p.e)
    if isinstance(p, If):
        return (
            pad
            + "if "
            + print_expr(p.e)
            + " {\n"
            + print_program(p.then, indent + 1)
            + "\n"
            + pad
            + "} else {\n"
            + print_program(p.other, indent + 1)
            + "\n"
            + pad
            + "}"
        )
    if isinstance(p, While):
        return pad + "while " + print_expr(p.e) + " {\n" + print_program(p.body, indent + 1) + "\n" + pad + "}"
    if isinstance(p, Seq):
        # a non-trailing local must be braced: unbraced local scopes to the
        # end of the enclosing block when reparsed
        parts = []
        for i, item in enumerate(p.items):
            text = print_program(item, indent)
            if isinstance(item, Local) and i != len(p.items) - 1:
                inner = print_program(item, indent + 1)
                text = pad + "{\n" + inner + "\n" + pad + "}"
            parts.append(text)
        return ";\n".join(parts)
    if isinstance(p, QInit):
        return pad + ", ".join(q.name for q in p.qs) + " <q " + print_expr(p.e)
    if isinstance(p, QApply):
        return pad + "on " + ", ".join(q.name for q in p.qs) + " apply " + print_expr(p.e)
    if isinstance(p, Measure):
        return (
            pad
            + ", ".join(x.name for x in p.xs)
            + " <m "
            + ", ".join(q.name for q in p.qs)
            + " with "
            + print_expr(p.e)
        )
    if isinstance(p, Local):
        return pad + "local " + p.v.name + "; {\n" + print_program(p.body, indent + 1) + "\n" + pad + "}"
    if isinstance(p, Hole):
        return pad + f"@{p.i}"
    raise AssertionError(type(p))


def print_program_line(p: Program) -> str:
    """Single-line rendering used in goal displays and certificates."""
    return " ".join(print_program(p).split())
