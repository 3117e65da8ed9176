"""Static variable analyses over programs and contexts.

Five sets drive the rule side conditions: free variables, inner (variables
shadowing a hole), covered (variables shadowing *every* hole), overwritten
(written before first read), and written.  `covered` of a hole-free program
is the set of all variables, so it is represented by a two-case wrapper.

Also here: local-respecting and full variable substitutions, and the
no-conflict predicate guarding renamings against capture by local binders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ast as A
from . import expr as ex
from .ast import Program
from .types import VarDecl

ALL = "ALL"


class Covered:
    """Either a finite set of variable names or ALL (every variable)."""

    __slots__ = ("names",)

    def __init__(self, names=None):
        self.names = None if names is None else frozenset(names)

    @staticmethod
    def all() -> "Covered":
        return Covered(None)

    @property
    def is_all(self) -> bool:
        return self.names is None

    def union_names(self, names) -> "Covered":
        if self.is_all:
            return self
        return Covered(self.names | frozenset(names))

    def intersect(self, other: "Covered") -> "Covered":
        if self.is_all:
            return other
        if other.is_all:
            return self
        return Covered(self.names & other.names)

    def intersect_names(self, names) -> frozenset:
        names = frozenset(names)
        return names if self.is_all else names & self.names

    def __contains__(self, name) -> bool:
        return self.is_all or name in self.names

    def __eq__(self, other):
        return isinstance(other, Covered) and self.names == other.names

    def __repr__(self):
        return "ALL" if self.is_all else repr(set(self.names))


@dataclass(frozen=True)
class VarSetReport:
    fv: frozenset
    inner: frozenset
    covered: Covered
    overwr: frozenset
    written: frozenset

    def as_dict(self) -> dict:
        return {
            "fv": sorted(self.fv),
            "inner": sorted(self.inner),
            "covered": ALL if self.covered.is_all else sorted(self.covered.names),
            "overwr": sorted(self.overwr),
            "written": sorted(self.written),
        }


def _fve(e) -> frozenset:
    return frozenset(n for n, _ in ex.fv_expr(e))


def fv(p: Program) -> frozenset:
    if isinstance(p, (A.Hole, A.Skip)):
        return frozenset()
    if isinstance(p, (A.Assign, A.Sample)):
        return frozenset(x.name for x in p.xs) | _fve(p.e)
    if isinstance(p, A.Local):
        return fv(p.body) - {p.v.name}
    if isinstance(p, A.QInit):
        return frozenset(q.name for q in p.qs) | _fve(p.e)
    if isinstance(p, A.QApply):
        return frozenset(q.name for q in p.qs) | _fve(p.e)
    if isinstance(p, A.Measure):
        return frozenset(q.name for q in p.qs) | frozenset(x.name for x in p.xs) | _fve(p.e)
    if isinstance(p, A.Seq):
        out = frozenset()
        for c in p.items:
            out |= fv(c)
        return out
    if isinstance(p, A.If):
        return _fve(p.e) | fv(p.then) | fv(p.other)
    if isinstance(p, A.While):
        return _fve(p.e) | fv(p.body)
    raise AssertionError(type(p))


def inner(p: Program) -> frozenset:
    if isinstance(p, A.Hole):
        return frozenset()
    if A.is_program(p):
        return frozenset()
    if isinstance(p, A.Local):
        return inner(p.body) | {p.v.name}
    if isinstance(p, A.If):
        return inner(p.then) | inner(p.other)
    if isinstance(p, A.While):
        return inner(p.body)
    if isinstance(p, A.Seq):
        out = frozenset()
        for c in p.items:
            out |= inner(c)
        return out
    raise AssertionError(type(p))


def covered(p: Program) -> Covered:
    if isinstance(p, A.Hole):
        return Covered(frozenset())
    if A.is_program(p):
        return Covered.all()
    if isinstance(p, A.Seq):
        out = covered(p.items[0])
        for c in p.items[1:]:
            out = out.intersect(covered(c))
        return out
    if isinstance(p, A.If):
        return covered(p.then).intersect(covered(p.other))
    if isinstance(p, A.While):
        return covered(p.body)
    if isinstance(p, A.Local):
        return covered(p.body).union_names({p.v.name})
    raise AssertionError(type(p))


def overwr(p: Program) -> frozenset:
    if isinstance(p, (A.Hole, A.Skip, A.While, A.QApply)):
        return frozenset()
    if isinstance(p, (A.Assign, A.Sample)):
        return frozenset(x.name for x in p.xs) - _fve(p.e)
    if isinstance(p, A.QInit):
        return frozenset(q.name for q in p.qs)
    if isinstance(p, A.Measure):
        return frozenset(x.name for x in p.xs) - _fve(p.e)
    if isinstance(p, A.If):
        return (overwr(p.then) & overwr(p.other)) - _fve(p.e)
    if isinstance(p, A.Local):
        return overwr(p.body) - {p.v.name}
    if isinstance(p, A.Seq):
        # left fold of: overwr(C;C') = overwr C | ((overwr C' \ fv C) & covered C)
        acc_ov, acc_fv, acc_cov = overwr(p.items[0]), fv(p.items[0]), covered(p.items[0])
        for c in p.items[1:]:
            acc_ov = acc_ov | acc_cov.intersect_names(overwr(c) - acc_fv)
            acc_fv = acc_fv | fv(c)
            acc_cov = acc_cov.intersect(covered(c))
        return acc_ov
    raise AssertionError(type(p))


def written(p: Program) -> frozenset:
    if isinstance(p, (A.Hole, A.Skip)):
        return frozenset()
    if isinstance(p, (A.Assign, A.Sample)):
        return frozenset(x.name for x in p.xs)
    if isinstance(p, A.Local):
        return written(p.body) - {p.v.name}
    if isinstance(p, (A.QInit, A.QApply)):
        return frozenset(q.name for q in p.qs)
    if isinstance(p, A.Measure):
        return frozenset(x.name for x in p.xs) | frozenset(q.name for q in p.qs)
    if isinstance(p, A.If):
        return written(p.then) | written(p.other)
    if isinstance(p, A.While):
        return written(p.body)
    if isinstance(p, A.Seq):
        out = frozenset()
        for c in p.items:
            out |= written(c)
        return out
    raise AssertionError(type(p))


def varsets(p: Program) -> VarSetReport:
    return VarSetReport(fv(p), inner(p), covered(p), overwr(p), written(p))


# ---------------------------------------------------------------------------
# Substitutions


class Substitution:
    """Finitely supported map from variables to compatible variables."""

    def __init__(self, mapping):
        self.map = {}
        for v, w in dict(mapping).items():
            if not v.compatible(w):
                raise ValueError(f"{v.name} and {w.name} are not compatible (kind/type differ)")
            if v != w:
                self.map[v] = w

    def __call__(self, v: VarDecl) -> VarDecl:
        return self.map.get(v, v)

    @property
    def dom(self) -> frozenset:
        return frozenset(self.map)

    def dom_names(self) -> frozenset:
        return frozenset(v.name for v in self.map)

    def without(self, v: VarDecl) -> "Substitution":
        return Substitution({k: w for k, w in self.map.items() if k != v})

    def injective_on(self, decls) -> bool:
        imgs = [self(v) for v in decls]
        return len({d.name for d in imgs}) == len({d.name for d in decls})

    def image_names(self, names) -> frozenset:
        by_name = {v.name: w.name for v, w in self.map.items()}
        return frozenset(by_name.get(n, n) for n in names)

    def items(self):
        return self.map.items()

    def __repr__(self):
        return "{" + ", ".join(f"{v.name}->{w.name}" for v, w in sorted(self.map.items(), key=lambda it: it[0].name)) + "}"


def _subst_expr_vars(e, sigma: Substitution):
    mapping = {v: w for v, w in sigma.items() if v.is_classical}
    return ex.rename_expr_vars(e, mapping) if mapping else e


def subst_vars(p: Program, sigma: Substitution) -> Program:
    """Replace every non-local occurrence of v by sigma(v)."""
    if isinstance(p, (A.Skip, A.Hole)):
        return p
    if isinstance(p, A.Assign):
        return A.Assign(tuple(sigma(x) for x in p.xs), _subst_expr_vars(p.e, sigma))
    if isinstance(p, A.Sample):
        return A.Sample(tuple(sigma(x) for x in p.xs), _subst_expr_vars(p.e, sigma))
    if isinstance(p, A.If):
        return A.If(_subst_expr_vars(p.e, sigma), subst_vars(p.then, sigma), subst_vars(p.other, sigma))
    if isinstance(p, A.While):
        return A.While(_subst_expr_vars(p.e, sigma), subst_vars(p.body, sigma))
    if isinstance(p, A.Seq):
        return A.seq([subst_vars(c, sigma) for c in p.items])
    if isinstance(p, A.QInit):
        return A.QInit(tuple(sigma(q) for q in p.qs), _subst_expr_vars(p.e, sigma))
    if isinstance(p, A.QApply):
        return A.QApply(_subst_expr_vars(p.e, sigma), tuple(sigma(q) for q in p.qs))
    if isinstance(p, A.Measure):
        return A.Measure(tuple(sigma(x) for x in p.xs), tuple(sigma(q) for q in p.qs), _subst_expr_vars(p.e, sigma))
    if isinstance(p, A.Local):
        return A.Local(p.v, subst_vars(p.body, sigma.without(p.v)))
    raise AssertionError(type(p))


def occurring_vars(p: Program) -> frozenset:
    """Every VarDecl occurring in p, bound or free."""
    out: set = set()

    def go_expr(e):
        for n, _ in ex.fv_expr(e):
            pass  # names handled through decls below

    def collect_expr(e):
        if isinstance(e, ex.VarRef):
            out.add(e.var)
        for c in e.children():
            collect_expr(c)

    def go(q):
        if isinstance(q, (A.Assign, A.Sample)):
            out.update(q.xs)
            collect_expr(q.e)
        elif isinstance(q, (A.QInit,)):
            out.update(q.qs)
            collect_expr(q.e)
        elif isinstance(q, A.QApply):
            out.update(q.qs)
            collect_expr(q.e)
        elif isinstance(q, A.Measure):
            out.update(q.xs)
            out.update(q.qs)
            collect_expr(q.e)
        elif isinstance(q, (A.If, A.While)):
            collect_expr(q.e)
        elif isinstance(q, A.Local):
            out.add(q.v)
        for c in A.children(q):
            go(c)

    go(p)
    return frozenset(out)


def full_subst_vars(p: Program, sigma: Substitution) -> Program:
    """Replace every occurrence, binders included; sigma must be injective on p's variables."""
    occ = occurring_vars(p)
    if not sigma.injective_on(occ):
        raise ValueError("substitution is not injective on the variables of the program")

    def go(q: Program) -> Program:
        if isinstance(q, A.Local):
            return A.Local(sigma(q.v), go(q.body))
        if isinstance(q, A.If):
            return A.If(_subst_expr_vars(q.e, sigma), go(q.then), go(q.other))
        if isinstance(q, A.While):
            return A.While(_subst_expr_vars(q.e, sigma), go(q.body))
        if isinstance(q, A.Seq):
            return A.seq([go(c) for c in q.items])
        return subst_vars(q, sigma)  # leaves have no binders

    return go(p)


@dataclass(frozen=True)
class ConflictWitness:
    local_var: str
    offending: frozenset  # sigma-image names that collide with the binder

    def __str__(self):
        return f"local {self.local_var}: {self.local_var} in sigma(fv body ∩ dom sigma) = {sorted(self.offending)}"


def no_conflict(sigma: Substitution, p: Program):
    """(ok, witness): derivability of the capture-freedom predicate.

    The only interesting rule is the local binder: the images of substituted
    free variables of the body must avoid the binder's name.
    """
    if isinstance(p, (A.Skip, A.Assign, A.Sample, A.QInit, A.QApply, A.Measure, A.Hole)):
        return True, None
    if isinstance(p, A.If):
        ok, w = no_conflict(sigma, p.then)
        if not ok:
            return ok, w
        return no_conflict(sigma, p.other)
    if isinstance(p, A.While):
        return no_conflict(sigma, p.body)
    if isinstance(p, A.Seq):
        for c in p.items:
            ok, w = no_conflict(sigma, c)
            if not ok:
                return ok, w
        return True, None
    if isinstance(p, A.Local):
        touched = fv(p.body) & sigma.dom_names()
        image = sigma.image_names(touched)
        if p.v.name in image:
            return False, ConflictWitness(p.v.name, image)
        return no_conflict(sigma.without(p.v), p.body)
    raise AssertionError(type(p))
