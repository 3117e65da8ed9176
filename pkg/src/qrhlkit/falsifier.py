"""Sound numeric refutation of relational judgments on small workspaces.

A judgment asserts that every separable input coupling satisfying the
precondition admits a separable output coupling with the two program outputs
as marginals and support inside the postcondition.  Separable states have
positive partial transpose, so emptiness of the PPT-relaxed feasibility
problem refutes the judgment; feasibility certifies nothing (PPT is only
necessary), hence the other verdict is "inconclusive".

Feasibility is decided by cyclic alternating projections onto four convex
sets (PSD, PPT, support, marginals).  For classical-only judgments the
problem degenerates to exact linear feasibility over diagonal couplings and
is decided by an LP (phase-1 style, HiGHS).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import predicates as P
from .ast import Program
from .kernel.goals import Judgment
from .linalg import front_permutation, partial_trace
from .semantics import CqOperator, apply_denot
from .types import value_sort_key
from .workspace import DoubledWorkspace, Workspace

GAP_TOL = 1e-6
FEAS_TOL = 1e-9
MAX_ITERS = 20_000
PLATEAU_WINDOW = 100


@dataclass
class FeasibilityReport:
    verdict: str  # 'refuted' | 'inconclusive'
    residuals: dict
    iterations: int
    details: list = field(default_factory=list)

    @property
    def refuted(self) -> bool:
        return self.verdict == "refuted"


# ---------------------------------------------------------------------------
# Input generation: pure product states spanning the precondition


def _single_side_family(dim: int) -> list:
    """Deterministic tomography-style family spanning the Hermitian matrices."""
    out = []
    for i in range(dim):
        v = np.zeros(dim, dtype=complex)
        v[i] = 1.0
        out.append(v)
    for i in range(dim):
        for j in range(i + 1, dim):
            v = np.zeros(dim, dtype=complex)
            v[i] = v[j] = 1 / np.sqrt(2)
            out.append(v)
            w = np.zeros(dim, dtype=complex)
            w[i] = 1 / np.sqrt(2)
            w[j] = 1j / np.sqrt(2)
            out.append(w)
    return out


def product_spanning_inputs(pre: P.PredExpr, dws: DoubledWorkspace, cap_per_pair: int = 16) -> list:
    """Pure product inputs inside the precondition, per classical memory pair."""
    base = dws.base
    d_single = base.qdim
    family = _single_side_family(d_single)
    inputs = []
    for mems in dws.memory_pairs():
        space = P.eval_pred(pre, mems, dws)
        if space.dim == 0:
            continue
        m1, m2 = mems
        key = tuple(m1) + tuple(m2)
        if d_single == 1:
            inputs.append(CqOperator(dws, {key: np.array([[1.0 + 0j]])}))
            continue
        found = 0
        for f in family:
            for g in family:
                v = np.kron(f, g)
                if space.contains_vec(v, 1e-9):
                    inputs.append(CqOperator(dws, {key: np.outer(v, v.conj())}))
                    found += 1
                    if found >= cap_per_pair:
                        break
            if found >= cap_per_pair:
                break
    return inputs


# ---------------------------------------------------------------------------
# Feasibility core


def _doubled_marginal(rho: CqOperator, dws: DoubledWorkspace, side: int) -> CqOperator:
    base = dws.base
    keep = dws.side_slots(side)
    n = len(base.classical)
    out = CqOperator(base)
    for key, mat in rho.branches.items():
        m = key[:n] if side == 1 else key[n:]
        out.add_branch(m, partial_trace(mat, dws.qdims, keep))
    return out.prune()


def _sorted_keys(branches) -> list:
    return sorted(branches, key=lambda m: tuple(value_sort_key(v) for v in m))


class _QuantumFeasibility:
    """Alternating projections over branch matrices of the doubled workspace."""

    def __init__(self, dws: DoubledWorkspace, out_l: CqOperator, out_r: CqOperator, post: P.PredExpr):
        self.dws = dws
        base = dws.base
        self.d = base.qdim
        self.dd = dws.qdim
        self.keys_l = _sorted_keys(out_l.branches)
        self.keys_r = _sorted_keys(out_r.branches)
        self.out_l = out_l
        self.out_r = out_r
        self.keys = [tuple(a) + tuple(b) for a in self.keys_l for b in self.keys_r]
        n = len(base.classical)
        self.posts = {}
        for k in self.keys:
            self.posts[k] = P.eval_pred(post, (k[:n], k[n:]), dws).projector()
        # partial transpose permutation on the 2-side quantum slots
        self.pt_axes = self._pt_spec()
        self._build_marginal_operator()

    def _pt_spec(self):
        slots2 = self.dws.side_slots(2)
        return slots2

    def _partial_transpose(self, mat: np.ndarray) -> np.ndarray:
        dims = list(self.dws.qdims)
        nd = len(dims)
        t = mat.reshape(dims + dims)
        perm = list(range(2 * nd))
        for s in self.pt_axes:
            perm[s], perm[nd + s] = perm[nd + s], perm[s]
        return t.transpose(perm).reshape(self.dd, self.dd)

    def _build_marginal_operator(self):
        nk = len(self.keys)
        nvar = nk * self.dd * self.dd
        rows = []
        rhs = []
        d = self.d
        # tr over side 2 equals out_l branchwise; tr over side 1 equals out_r.
        perm = front_permutation(self.dws.qdims, self.dws.side_slots(1))
        # index helpers: doubled basis index -> (side1 index, side2 index)
        idx1 = np.empty(self.dd, dtype=np.int64)
        idx2 = np.empty(self.dd, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.dd)
        for i_orig in range(self.dd):
            f = inv[i_orig]
            idx1[i_orig] = f // (self.dd // d)
            idx2[i_orig] = f % (self.dd // d)
        self._cache = (idx1, idx2)
        a_cols = []

        def var_index(k, i, j):
            return k * self.dd * self.dd + i * self.dd + j

        for ki, m1 in enumerate(self.keys_l):
            target = self.out_l.branch(m1)
            for a in range(d):
                for c in range(d):
                    row = {}
                    for kk, key in enumerate(self.keys):
                        if key[: len(m1)] != tuple(m1):
                            continue
                        for i in range(self.dd):
                            for j in range(self.dd):
                                if idx1[i] == a and idx1[j] == c and idx2[i] == idx2[j]:
                                    row[var_index(kk, i, j)] = row.get(var_index(kk, i, j), 0) + 1.0
                    rows.append(row)
                    rhs.append(target[a, c])
        n = len(self.dws.base.classical)
        for ki, m2 in enumerate(self.keys_r):
            target = self.out_r.branch(m2)
            for b in range(d):
                for dd_ in range(d):
                    row = {}
                    for kk, key in enumerate(self.keys):
                        if key[n:] != tuple(m2):
                            continue
                        for i in range(self.dd):
                            for j in range(self.dd):
                                if idx2[i] == b and idx2[j] == dd_ and idx1[i] == idx1[j]:
                                    row[var_index(kk, i, j)] = row.get(var_index(kk, i, j), 0) + 1.0
                    rows.append(row)
                    rhs.append(target[b, dd_])
        amat = np.zeros((len(rows), nvar), dtype=complex)
        for r, row in enumerate(rows):
            for cidx, v in row.items():
                amat[r, cidx] = v
        self.A = amat
        self.b = np.array(rhs, dtype=complex)
        # pseudo-inverse correction operator for the affine projection
        gram = self.A @ self.A.conj().T
        self.gram_inv = np.linalg.pinv(gram, rcond=1e-12)

    # -- projections --------------------------------------------------------

    def _vec(self, mats) -> np.ndarray:
        return np.concatenate([mats[k].reshape(-1) for k in self.keys])

    def _unvec(self, x) -> dict:
        out = {}
        sz = self.dd * self.dd
        for i, k in enumerate(self.keys):
            out[k] = x[i * sz : (i + 1) * sz].reshape(self.dd, self.dd)
        return out

    def proj_psd(self, mats) -> dict:
        out = {}
        for k, m in mats.items():
            h = (m + m.conj().T) / 2
            vals, vecs = np.linalg.eigh(h)
            vals = np.clip(vals, 0, None)
            out[k] = (vecs * vals) @ vecs.conj().T
        return out

    def proj_ppt(self, mats) -> dict:
        out = {}
        for k, m in mats.items():
            t = self._partial_transpose(m)
            h = (t + t.conj().T) / 2
            vals, vecs = np.linalg.eigh(h)
            vals = np.clip(vals, 0, None)
            out[k] = self._partial_transpose((vecs * vals) @ vecs.conj().T)
        return out

    def proj_supp(self, mats) -> dict:
        out = {}
        for k, m in mats.items():
            p = self.posts[k]
            out[k] = p @ m @ p
        return out

    def proj_marg(self, mats) -> dict:
        x = self._vec(mats)
        resid = self.A @ x - self.b
        x = x - self.A.conj().T @ (self.gram_inv @ resid)
        return self._unvec(x)

    def initial(self) -> dict:
        total = max(float(np.real(self.out_r.trace())), 1e-12)
        mats = {}
        n = len(self.dws.base.classical)
        for k in self.keys:
            l = self.out_l.branch(k[:n])
            r = self.out_r.branch(k[n:])
            mats[k] = np.kron(l, r) / total
        return mats

    @staticmethod
    def _dist(a: dict, b: dict) -> float:
        return sum(float(np.linalg.norm(a[k] - b[k]) ** 2) for k in a)

    def run(self, max_iters: int = MAX_ITERS):
        """Cyclic projections; the residual is the within-cycle movement.

        When the four sets intersect, consecutive projections converge to a
        common point and the residual vanishes; an empty intersection leaves
        a persistent positive cycle diameter, which is the refutation signal.
        """
        mats = self.initial()
        hist: list = []
        for it in range(1, max_iters + 1):
            m1 = self.proj_psd(mats)
            m2 = self.proj_ppt(m1)
            m3 = self.proj_supp(m2)
            m4 = self.proj_marg(m3)
            move = float(
                np.sqrt(self._dist(m1, mats) + self._dist(m2, m1) + self._dist(m3, m2) + self._dist(m4, m3))
            )
            mats = m4
            hist.append(move)
            if move <= FEAS_TOL:
                return "inconclusive", move, it, "projection residual vanished (feasible point found)"
            if it >= PLATEAU_WINDOW and abs(hist[-1] - hist[-PLATEAU_WINDOW]) <= 1e-12:
                window = hist[-PLATEAU_WINDOW:]
                if min(window) >= GAP_TOL and all(
                    window[i + 1] <= window[i] + 1e-10 for i in range(len(window) - 1)
                ):
                    return "refuted", move, it, "projection residual converged to a persistent gap"
                return "inconclusive", move, it, "projection residual stalled below the refutation bar"
        return "inconclusive", hist[-1] if hist else 0.0, max_iters, "iteration budget exhausted"


def _classical_feasibility(dws: DoubledWorkspace, out_l: CqOperator, out_r: CqOperator, post: P.PredExpr):
    """Exact linear feasibility for diagonal couplings (no quantum variables)."""
    base = dws.base
    keys_l = _sorted_keys(out_l.branches)
    keys_r = _sorted_keys(out_r.branches)
    p1 = {k: float(np.real(out_l.branch(k)[0, 0])) for k in keys_l}
    p2 = {k: float(np.real(out_r.branch(k)[0, 0])) for k in keys_r}
    cells = []
    for m1 in keys_l:
        for m2 in keys_r:
            space = P.eval_pred(post, (m1, m2), dws)
            if space.dim > 0:
                cells.append((m1, m2))
    ncell = len(cells)
    rows = len(keys_l) + len(keys_r)
    a_eq = np.zeros((rows, ncell + 2 * rows))
    b_eq = np.zeros(rows)
    for r, m1 in enumerate(keys_l):
        for ci, (c1, _) in enumerate(cells):
            if c1 == m1:
                a_eq[r, ci] = 1.0
        b_eq[r] = p1[m1]
    for r2, m2 in enumerate(keys_r):
        r = len(keys_l) + r2
        for ci, (_, c2) in enumerate(cells):
            if c2 == m2:
                a_eq[r, ci] = 1.0
        b_eq[r] = p2[m2]
    # phase-1: minimize the total slack needed to satisfy the marginals
    for r in range(rows):
        a_eq[r, ncell + 2 * r] = 1.0
        a_eq[r, ncell + 2 * r + 1] = -1.0
    cost = np.zeros(ncell + 2 * rows)
    cost[ncell:] = 1.0
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (ncell + 2 * rows), method="highs")
    if not res.success:
        return "inconclusive", float("nan"), 1, f"linear program failed: {res.message}"
    gap = float(res.fun)
    if gap > FEAS_TOL:
        return "refuted", gap, 1, "no coupling matches the marginals on the allowed support (exact LP)"
    return "inconclusive", gap, 1, "a feasible diagonal coupling exists"


# ---------------------------------------------------------------------------
# Entry point


def ppt_falsify(
    j: Judgment,
    ws: Workspace,
    inputs: Optional[Sequence[CqOperator]] = None,
    max_iters: int = MAX_ITERS,
) -> FeasibilityReport:
    """Try to refute a judgment; sound in the 'refuted' direction only."""
    dws = DoubledWorkspace(ws)
    if inputs is None:
        inputs = product_spanning_inputs(j.pre, dws)
    residuals: dict = {}
    details: list = []
    iterations = 0
    verdict = "inconclusive"
    for n, rho in enumerate(inputs):
        rho.assert_state()
        if not P.satisfies(rho, j.pre, dws):
            details.append(f"input {n}: skipped (does not satisfy the precondition)")
            continue
        out_l, diag_l = apply_denot(j.left, _doubled_marginal(rho, dws, 1), ws)
        out_r, diag_r = apply_denot(j.right, _doubled_marginal(rho, dws, 2), ws)
        if diag_l.while_nonconvergence or diag_r.while_nonconvergence:
            details.append(f"input {n}: skipped (program evaluation did not converge)")
            continue
        tl, tr = float(np.real(out_l.trace())), float(np.real(out_r.trace()))
        if abs(tl - tr) > 1e-9:
            residuals[f"input {n}: marginal traces"] = abs(tl - tr)
            details.append(f"input {n}: output traces differ ({tl!r} vs {tr!r}); no coupling exists")
            verdict = "refuted"
            iterations += 1
            break
        if ws.qdim == 1:
            v, gap, its, note = _classical_feasibility(dws, out_l, out_r, j.post)
        else:
            core = _QuantumFeasibility(dws, out_l, out_r, j.post)
            v, gap, its, note = core.run(max_iters)
        iterations += its
        residuals[f"input {n}"] = gap
        details.append(f"input {n}: {v} ({note}; residual {gap:.3e})")
        if v == "refuted":
            verdict = "refuted"
            break
    return FeasibilityReport(verdict, residuals, iterations, details)
