"""Finite-dimensional denotational semantics of the while-language.

The semantic state is a cq-operator: a finite map from classical memories to
matrices over the quantum factor of the workspace.  Statement denotations are
implemented directly from their defining equations; `local v` adjoins a
transient same-typed ancilla in the default state, swaps it with v, runs the
body, swaps back and traces the ancilla out, so the caller-visible v is
untouched.

Denotational equivalence is decided on the spanning family
{|m><m| (x) E_jk} of cq inputs, which is complete because the semantics is
only defined (and linear) on cq-operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import ast as A
from . import expr as ex
from .ast import Program
from .linalg import (
    basis_vector,
    embed_operator,
    partial_trace,
    swap_operator,
    trace_norm,
)
from .types import VarDecl, value_sort_key
from .workspace import BudgetExceeded, Workspace

WHILE_TAIL_TOL = 1e-12
MAX_WHILE_ITERS = 10_000
PSD_FLOOR = 1e-10
DENEQ_TOL = 1e-9


class CqOperator:
    """Map from classical memories (value tuples) to quantum-factor matrices.

    Positivity is *not* enforced on construction: the evaluator is linear and
    is routinely applied to matrix-unit probes.  Use ``psd_violation`` /
    ``assert_state`` where an actual state is required.
    """

    __slots__ = ("ws", "branches")

    def __init__(self, ws: Workspace, branches: Optional[dict] = None):
        self.ws = ws
        self.branches = {}
        if branches:
            for m, mat in branches.items():
                self.add_branch(m, mat)

    def add_branch(self, mem: tuple, mat: np.ndarray) -> None:
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (self.ws.qdim, self.ws.qdim):
            raise ValueError(f"branch matrix must be {self.ws.qdim}x{self.ws.qdim}")
        if mem in self.branches:
            self.branches[mem] = self.branches[mem] + mat
        else:
            self.branches[mem] = mat.copy()

    def branch(self, mem: tuple) -> np.ndarray:
        got = self.branches.get(mem)
        if got is None:
            return np.zeros((self.ws.qdim, self.ws.qdim), dtype=complex)
        return got

    def prune(self) -> "CqOperator":
        self.branches = {m: v for m, v in self.branches.items() if np.any(v)}
        return self

    def sorted_memories(self) -> list:
        return sorted(self.branches, key=lambda m: tuple(value_sort_key(v) for v in m))

    def trace(self) -> complex:
        return sum((np.trace(v) for v in self.branches.values()), 0.0 + 0.0j)

    def trace_norm(self) -> float:
        return sum(trace_norm(v) for v in self.branches.values())

    def scaled(self, factor) -> "CqOperator":
        return CqOperator(self.ws, {m: factor * v for m, v in self.branches.items()})

    def plus(self, other: "CqOperator") -> "CqOperator":
        out = CqOperator(self.ws, dict(self.branches))
        for m, v in other.branches.items():
            out.add_branch(m, v)
        return out

    def psd_violation(self) -> float:
        from .linalg import psd_violation

        return max((psd_violation(v) for v in self.branches.values()), default=0.0)

    def assert_state(self, tol: float = PSD_FLOOR) -> None:
        bad = self.psd_violation()
        if bad > tol:
            raise ValueError(f"branch matrix is not positive semidefinite (violation {bad:.2e})")

    @staticmethod
    def point(ws: Workspace, mem: tuple, qstate: Optional[np.ndarray] = None) -> "CqOperator":
        """|m><m| tensor |psi><psi| (default: the all-defaults quantum state)."""
        if qstate is None:
            idx = 0
            for d in ws.quantum:
                idx = idx * d.ty.size + d.default
            qstate = basis_vector(ws.qdim, idx)
        qstate = np.asarray(qstate, dtype=complex).reshape(-1)
        return CqOperator(ws, {tuple(mem): np.outer(qstate, qstate.conj())})

    @staticmethod
    def initial(ws: Workspace) -> "CqOperator":
        return CqOperator.point(ws, ws.default_memory())

    def __repr__(self):
        return f"CqOperator({len(self.branches)} branches, D={self.ws.qdim})"


@dataclass
class Diagnostics:
    while_nonconvergence: bool = False
    residual: float = 0.0
    notes: list = field(default_factory=list)

    def merge(self, other: "Diagnostics") -> None:
        self.while_nonconvergence |= other.while_nonconvergence
        self.residual = max(self.residual, other.residual)
        self.notes.extend(other.notes)


@dataclass(frozen=True)
class SuperOp:
    """A superoperator with provenance (what construction it denotes)."""

    apply: Callable[[CqOperator], CqOperator]
    provenance: str

    def __call__(self, rho: CqOperator) -> CqOperator:
        return self.apply(rho)


class Evaluator:
    def __init__(self, ws: Workspace, max_while_iters: int = MAX_WHILE_ITERS, while_tol: float = WHILE_TAIL_TOL):
        self.ws = ws
        self.max_while_iters = max_while_iters
        self.while_tol = while_tol
        self.diag = Diagnostics()

    # -- helpers ------------------------------------------------------------

    def _qslots(self, decls) -> list:
        return [self.ws.quantum_pos(d.name) for d in decls]

    def restrict(self, e: ex.Expr, rho: CqOperator, negate: bool = False) -> CqOperator:
        out = CqOperator(self.ws)
        for m, mat in rho.branches.items():
            val = bool(ex.eval_expr(e, self.ws.env(m)))
            if val != negate:
                out.add_branch(m, mat)
        return out

    # -- statement dispatch --------------------------------------------------

    def run(self, p: Program, rho: CqOperator) -> CqOperator:
        if isinstance(p, A.Skip):
            return rho
        if isinstance(p, A.Assign):
            out = CqOperator(self.ws)
            for m, mat in rho.branches.items():
                v = ex.eval_expr(p.e, self.ws.env(m))
                out.add_branch(self.ws.mem_set(m, p.xs, v), mat)
            return out.prune()
        if isinstance(p, A.Sample):
            out = CqOperator(self.ws)
            for m, mat in rho.branches.items():
                dist = ex.eval_expr(p.e, self.ws.env(m))
                for z, w in dist.weights:
                    out.add_branch(self.ws.mem_set(m, p.xs, z), float(w) * mat)
            return out.prune()
        if isinstance(p, A.If):
            a = self.run(p.then, self.restrict(p.e, rho))
            b = self.run(p.other, self.restrict(p.e, rho, negate=True))
            return a.plus(b).prune()
        if isinstance(p, A.While):
            return self._run_while(p, rho)
        if isinstance(p, A.Seq):
            cur = rho
            for item in p.items:
                cur = self.run(item, cur)
            return cur
        if isinstance(p, A.QInit):
            return self._run_qinit(p.qs, p.e, rho)
        if isinstance(p, A.QApply):
            out = CqOperator(self.ws)
            slots = self._qslots(p.qs)
            for m, mat in rho.branches.items():
                u = embed_operator(ex.eval_expr(p.e, self.ws.env(m)), slots, self.ws.qdims)
                out.add_branch(m, u @ mat @ u.conj().T)
            return out
        if isinstance(p, A.Measure):
            out = CqOperator(self.ws)
            slots = self._qslots(p.qs)
            for m, mat in rho.branches.items():
                meas = ex.eval_expr(p.e, self.ws.env(m))
                for z in meas.outcomes():
                    proj = embed_operator(meas.projector(z), slots, self.ws.qdims)
                    out.add_branch(self.ws.mem_set(m, p.xs, z), proj @ mat @ proj.conj().T)
            return out.prune()
        if isinstance(p, A.Local):
            return self._run_local(p.v, p.body, rho)
        if isinstance(p, A.Hole):
            raise ValueError("cannot evaluate a context; instantiate its holes first")
        raise AssertionError(type(p))

    def _run_qinit(self, qs, e: ex.Expr, rho: CqOperator) -> CqOperator:
        out = CqOperator(self.ws)
        slots = self._qslots(qs)
        keep = [k for k in range(len(self.ws.qdims)) if k not in slots]
        from .linalg import front_permutation

        perm = front_permutation(self.ws.qdims, slots)
        for m, mat in rho.branches.items():
            psi = np.asarray(ex.eval_expr(e, self.ws.env(m)), dtype=complex).reshape(-1)
            rest = partial_trace(mat, self.ws.qdims, keep)
            front = np.kron(np.outer(psi, psi.conj()), rest)
            new = np.zeros_like(mat)
            new[np.ix_(perm, perm)] = front
            out.add_branch(m, new)
        return out

    def _run_while(self, p: A.While, rho: CqOperator) -> CqOperator:
        acc = CqOperator(self.ws)
        cur = rho
        scale = max(rho.trace_norm(), 1.0)
        for _ in range(self.max_while_iters):
            acc = acc.plus(self.restrict(p.e, cur, negate=True))
            cur = self.run(p.body, self.restrict(p.e, cur))
            resid = cur.trace_norm()
            if resid <= self.while_tol * scale:
                return acc.prune()
        self.diag.while_nonconvergence = True
        self.diag.residual = max(self.diag.residual, cur.trace_norm())
        self.diag.notes.append(f"while loop did not converge (residual {cur.trace_norm():.3e})")
        return acc.prune()

    def _run_local(self, v: VarDecl, body: Program, rho: CqOperator) -> CqOperator:
        if v.is_classical:
            pos = self.ws.classical_pos(v.name)
            out = CqOperator(self.ws)
            for m, mat in rho.branches.items():
                saved = m[pos]
                inner_in = CqOperator(self.ws, {self.ws.mem_set(m, (v,), v.default_value): mat})
                inner_out = self.run(body, inner_in)
                for m2, mat2 in inner_out.branches.items():
                    out.add_branch(self.ws.mem_set(m2, (v,), saved), mat2)
            return out.prune()
        # quantum: adjoin ancilla of the same type, swap, run, swap back, trace out
        anc = VarDecl(_fresh_anc_name(self.ws, v.name), v.kind, v.ty, v.default)
        ws2 = self.ws.extend(anc)
        sub = Evaluator(ws2, self.max_while_iters, self.while_tol)
        vslot = ws2.quantum_pos(v.name)
        aslot = ws2.quantum_pos(anc.name)
        swap = swap_operator(ws2.qdims, [vslot], [aslot])
        init = basis_vector(v.ty.size, v.default)
        init_mat = np.outer(init, init.conj())
        lifted = CqOperator(ws2)
        for m, mat in rho.branches.items():
            lifted.add_branch(m, swap @ np.kron(mat, init_mat) @ swap.conj().T)
        result = sub.run(body, lifted)
        self.diag.merge(sub.diag)
        keep = [k for k in range(len(ws2.qdims)) if k != aslot]
        out = CqOperator(self.ws)
        for m, mat in result.branches.items():
            back = swap @ mat @ swap.conj().T
            out.add_branch(m, partial_trace(back, ws2.qdims, keep))
        return out.prune()


def _fresh_anc_name(ws: Workspace, base: str) -> str:
    name = base + "_anc"
    while ws.has(name):
        name += "x"
    return name


# ---------------------------------------------------------------------------
# Public operations


def apply_denot(p: Program, rho: CqOperator, ws: Optional[Workspace] = None, **opts):
    """Run the denotation; returns (output, diagnostics)."""
    ws = ws or rho.ws
    ev = Evaluator(ws, **opts)
    out = ev.run(p, rho)
    return out, ev.diag


def denot_superop(p: Program, ws: Workspace, **opts) -> SuperOp:
    def apply(rho: CqOperator) -> CqOperator:
        return Evaluator(ws, **opts).run(p, rho)

    return SuperOp(apply, provenance=f"denot({A.print_program_line(p)})")


def restrict_superop(e: ex.Expr, ws: Workspace) -> SuperOp:
    def apply(rho: CqOperator) -> CqOperator:
        return Evaluator(ws).restrict(e, rho)

    return SuperOp(apply, provenance=f"restrict({A.print_expr(e)})")


def init_program(decls) -> Program:
    """init V: initialize each variable to its default, in declaration order."""
    stmts = []
    for d in decls:
        if d.is_classical:
            stmts.append(A.Assign((d,), ex.const(d.default_value, d.ty)))
        else:
            stmts.append(A.QInit((d,), ex.ket((d.default_value,), (d.ty,))))
    return A.seq(stmts)


def einit(decls, ws: Workspace) -> SuperOp:
    """The state-preparation superoperator for a variable set.

    Classical variables are reset to their defaults (branches merge); quantum
    variables are traced out and re-prepared in the default basis state.
    """
    decls = list(decls)
    cnames = [d for d in decls if d.is_classical]
    qdecls = [d for d in decls if d.is_quantum]

    def apply(rho: CqOperator) -> CqOperator:
        out = CqOperator(ws)
        qslots = [ws.quantum_pos(d.name) for d in qdecls]
        keep = [k for k in range(len(ws.qdims)) if k not in qslots]
        from .linalg import front_permutation

        perm = front_permutation(ws.qdims, qslots) if qdecls else None
        psi = None
        if qdecls:
            idx = 0
            for d in qdecls:
                idx = idx * d.ty.size + d.default
            dq = 1
            for d in qdecls:
                dq *= d.ty.size
            psi = basis_vector(dq, idx)
        for m, mat in rho.branches.items():
            m2 = ws.mem_set(m, cnames, tuple(d.default_value for d in cnames)) if cnames else m
            if qdecls:
                rest = partial_trace(mat, ws.qdims, keep)
                front = np.kron(np.outer(psi, psi.conj()), rest)
                new = np.zeros_like(mat)
                new[np.ix_(perm, perm)] = front
                out.add_branch(m2, new)
            else:
                out.add_branch(m2, mat)
        return out.prune()

    return SuperOp(apply, provenance="einit({%s})" % ", ".join(d.name for d in decls))


def pr_after(e: ex.Expr, p: Program, rho: CqOperator, ws: Optional[Workspace] = None, **opts):
    """Probability that e holds after running p on rho; (value, converged)."""
    ws = ws or rho.ws
    out, diag = apply_denot(p, rho, ws, **opts)
    total = 0.0
    for m, mat in out.branches.items():
        if bool(ex.eval_expr(e, ws.env(m))):
            total += float(np.real(np.trace(mat)))
    return total, not diag.while_nonconvergence


@dataclass(frozen=True)
class DeneqResult:
    equal: bool
    counterexample: Optional[tuple]  # (memory, j, k, max diff)
    nonconvergent: bool

    def __bool__(self):
        return self.equal


def deneq_check(c: Program, d: Program, ws: Workspace, tol: float = DENEQ_TOL, force_units: bool = False, **opts) -> DeneqResult:
    """Compare denotations on the spanning family {|m><m| (x) E_jk}.

    When the budget allows, all D^2 matrix-unit probes of one memory are
    evaluated in a single run by entangling the quantum factor with a
    transient reference register (the program never touches it, so the
    output's reference blocks are exactly the per-unit outputs).  The explicit
    unit-by-unit loop remains as the fallback and as a cross-check target.
    """
    if not force_units and ws.qdim > 1 and ws.qdim * ws.qdim <= ws.budget:
        return _deneq_reference(c, d, ws, tol, **opts)
    return _deneq_units(c, d, ws, tol, **opts)


def _deneq_units(c: Program, d: Program, ws: Workspace, tol: float, **opts) -> DeneqResult:
    nonconv = False
    dim = ws.qdim
    for m in ws.memories():
        for j in range(dim):
            for k in range(dim):
                unit = np.zeros((dim, dim), dtype=complex)
                unit[j, k] = 1.0
                probe = CqOperator(ws, {m: unit})
                out1, diag1 = apply_denot(c, probe, ws, **opts)
                out2, diag2 = apply_denot(d, probe, ws, **opts)
                nonconv = nonconv or diag1.while_nonconvergence or diag2.while_nonconvergence
                keys = set(out1.branches) | set(out2.branches)
                for key in sorted(keys, key=lambda mm: tuple(value_sort_key(v) for v in mm)):
                    diff = float(np.max(np.abs(out1.branch(key) - out2.branch(key))))
                    if diff > tol:
                        return DeneqResult(False, (m, j, k, diff), nonconv)
    return DeneqResult(True, None, nonconv)


def _deneq_reference(c: Program, d: Program, ws: Workspace, tol: float, **opts) -> DeneqResult:
    from .types import FiniteType, QUANTUM, VarDecl

    dim = ws.qdim
    ref = VarDecl(_fresh_anc_name(ws, "deneqref"), QUANTUM, FiniteType(f"refdim{dim}x", tuple(range(dim))))
    ws2 = ws.extend(ref)
    omega = np.zeros(dim * dim, dtype=complex)
    omega[np.arange(dim) * dim + np.arange(dim)] = 1.0
    probe_mat = np.outer(omega, omega.conj())
    nonconv = False
    for m in ws.memories():
        probe = CqOperator(ws2, {m: probe_mat})
        out1, diag1 = apply_denot(c, probe, ws2, **opts)
        out2, diag2 = apply_denot(d, probe, ws2, **opts)
        nonconv = nonconv or diag1.while_nonconvergence or diag2.while_nonconvergence
        keys = set(out1.branches) | set(out2.branches)
        for key in sorted(keys, key=lambda mm: tuple(value_sort_key(v) for v in mm)):
            delta = out1.branch(key) - out2.branch(key)
            worst = float(np.max(np.abs(delta)))
            if worst > tol:
                flat = int(np.argmax(np.abs(delta)))
                row, col = divmod(flat, dim * dim)
                j, k = row % dim, col % dim
                return DeneqResult(False, (m, j, k, worst), nonconv)
    return DeneqResult(True, None, nonconv)


def choi_block(p: Program, ws: Workspace, m_in: tuple, m_out: tuple, **opts) -> np.ndarray:
    """Choi matrix of the (m_in -> m_out) block of the denotation."""
    dim = ws.qdim
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j in range(dim):
        for k in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[j, k] = 1.0
            out, _ = apply_denot(p, CqOperator(ws, {m_in: unit}), ws, **opts)
            block = out.branch(m_out)
            choi[j * dim : (j + 1) * dim, k * dim : (k + 1) * dim] = block
    return choi
