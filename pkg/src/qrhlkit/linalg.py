"""Dense linear algebra over tensor-slot decompositions, and closed subspaces.

Everything operates on the computational basis given by a tuple of slot
dimensions.  Basis index <-> digit tuples follow mixed-radix order with the
first slot most significant (matching itertools.product enumeration).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

RANK_TOL = 1e-9


# ---------------------------------------------------------------------------
# Index bookkeeping


_digits_cache: dict = {}
_perm_cache: dict = {}
_embed_cache: dict = {}


def _digits(dims: Sequence[int]) -> np.ndarray:
    """(prod(dims), len(dims)) array: row i holds the digit tuple of index i."""
    key = tuple(dims)
    got = _digits_cache.get(key)
    if got is not None:
        return got
    n = len(dims)
    total = 1
    for d in dims:
        total *= d
    out = np.zeros((total, n), dtype=np.int64)
    idx = np.arange(total)
    for k in range(n - 1, -1, -1):
        out[:, k] = idx % dims[k]
        idx //= dims[k]
    _digits_cache[key] = out
    return out


def _index_of(digits: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    idx = np.zeros(digits.shape[0], dtype=np.int64)
    for k, d in enumerate(dims):
        idx = idx * d + digits[:, k]
    return idx


def front_permutation(dims: Sequence[int], slots: Sequence[int]) -> np.ndarray:
    """perm with perm[i_front] = i_original for layout [slots..., rest...]."""
    key = (tuple(dims), tuple(slots))
    got = _perm_cache.get(key)
    if got is not None:
        return got
    slots = list(slots)
    rest = [k for k in range(len(dims)) if k not in slots]
    order = slots + rest
    new_dims = [dims[k] for k in order]
    dg = _digits(new_dims)
    orig = np.zeros_like(dg)
    for newpos, k in enumerate(order):
        orig[:, k] = dg[:, newpos]
    out = _index_of(orig, dims)
    _perm_cache[key] = out
    return out


def embed_operator(op: np.ndarray, slots: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift an operator on the given slots (in order) to the full space."""
    total = 1
    for d in dims:
        total *= d
    dsub = 1
    for k in slots:
        dsub *= dims[k]
    if op.shape != (dsub, dsub):
        raise ValueError(f"operator shape {op.shape} does not match slots of dimension {dsub}")
    key = (op.tobytes(), tuple(slots), tuple(dims))
    got = _embed_cache.get(key)
    if got is not None:
        return got
    perm = front_permutation(dims, slots)
    full_front = np.kron(op, np.eye(total // dsub, dtype=complex))
    out = np.zeros((total, total), dtype=complex)
    out[np.ix_(perm, perm)] = full_front
    if len(_embed_cache) > 4096:
        _embed_cache.clear()
    _embed_cache[key] = out
    return out


def embed_vector(vec: np.ndarray, slots: Sequence[int], rest_vec: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """vec on slots tensor rest_vec on the remaining slots, in original layout."""
    perm = front_permutation(dims, slots)
    front = np.kron(vec, rest_vec)
    out = np.zeros(front.shape[0], dtype=complex)
    out[perm] = front
    return out


def swap_operator(dims: Sequence[int], slots_a: Sequence[int], slots_b: Sequence[int]) -> np.ndarray:
    """Unitary permutation exchanging the registers slots_a and slots_b componentwise."""
    if len(slots_a) != len(slots_b):
        raise ValueError("swapped register lists must have equal length")
    for a, b in zip(slots_a, slots_b):
        if dims[a] != dims[b]:
            raise ValueError("swapped registers must have equal dimensions")
    dg = _digits(dims)
    swapped = dg.copy()
    for a, b in zip(slots_a, slots_b):
        swapped[:, a], swapped[:, b] = dg[:, b], dg[:, a]
    tgt = _index_of(swapped, dims)
    total = dg.shape[0]
    u = np.zeros((total, total), dtype=complex)
    u[tgt, np.arange(total)] = 1.0
    return u


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every slot not in ``keep`` (keep order = original order)."""
    keep = list(keep)
    drop = [k for k in range(len(dims)) if k not in keep]
    perm = front_permutation(dims, keep + drop)
    dkeep = 1
    for k in keep:
        dkeep *= dims[k]
    ddrop = rho.shape[0] // dkeep
    r = rho[np.ix_(perm, perm)].reshape(dkeep, ddrop, dkeep, ddrop)
    return np.einsum("ajbj->ab", r)


def basis_vector(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def trace_norm(m: np.ndarray) -> float:
    if m.size == 1:
        return float(abs(m.reshape(-1)[0]))
    return float(np.linalg.norm(np.linalg.svd(m, compute_uv=False), 1))


# ---------------------------------------------------------------------------
# Closed subspaces via orthonormal column bases


class Subspace:
    """A subspace of C^D held as a D x r matrix with orthonormal columns."""

    __slots__ = ("basis",)

    def __init__(self, basis: np.ndarray):
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 2:
            raise ValueError("subspace basis must be a matrix")
        self.basis = basis

    # -- constructors

    @staticmethod
    def top(dim: int) -> "Subspace":
        return Subspace(np.eye(dim, dtype=complex))

    @staticmethod
    def bottom(dim: int) -> "Subspace":
        return Subspace(np.zeros((dim, 0), dtype=complex))

    @staticmethod
    def span(columns, dim=None) -> "Subspace":
        cols = [np.asarray(c, dtype=complex).reshape(-1) for c in columns]
        if not cols:
            if dim is None:
                raise ValueError("empty span needs an explicit dimension")
            return Subspace.bottom(dim)
        m = np.stack(cols, axis=1)
        return Subspace._orthonormalize(m)

    @staticmethod
    def _orthonormalize(m: np.ndarray) -> "Subspace":
        if m.shape[1] == 0:
            return Subspace(m)
        u, s, _ = np.linalg.svd(m, full_matrices=False)
        if s.size == 0 or s[0] <= RANK_TOL:
            return Subspace.bottom(m.shape[0])
        r = int(np.sum(s > RANK_TOL * s[0]))
        return Subspace(u[:, :r])

    # -- basic data

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    # -- algebra

    def ortho(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.top(self.ambient)
        if self.dim == self.ambient:
            return Subspace.bottom(self.ambient)
        u, s, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(u[:, self.dim :])

    def sum(self, other: "Subspace") -> "Subspace":
        return Subspace._orthonormalize(np.concatenate([self.basis, other.basis], axis=1))

    def inter(self, other: "Subspace") -> "Subspace":
        if self.dim == 0 or other.dim == 0:
            return Subspace.bottom(self.ambient)
        d = self.ambient
        stacked = np.concatenate(
            [np.eye(d, dtype=complex) - self.projector(), np.eye(d, dtype=complex) - other.projector()], axis=0
        )
        return null_space(stacked)

    def apply(self, op: np.ndarray) -> "Subspace":
        if self.dim == 0:
            return Subspace.bottom(op.shape[0])
        return Subspace._orthonormalize(op @ self.basis)

    # -- tests

    def leq(self, other: "Subspace", tol: float = RANK_TOL) -> bool:
        if self.dim == 0:
            return True
        resid = self.basis - other.projector() @ self.basis
        return bool(np.max(np.linalg.norm(resid, axis=0), initial=0.0) <= tol)

    def contains_vec(self, v: np.ndarray, tol: float = RANK_TOL) -> bool:
        v = np.asarray(v, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            return True
        return bool(np.linalg.norm(v - self.projector() @ v) <= tol * n)

    def equals(self, other: "Subspace", tol: float = RANK_TOL) -> bool:
        return self.leq(other, tol) and other.leq(self, tol)

    def __repr__(self):
        return f"Subspace(dim={self.dim}/{self.ambient})"


def null_space(m: np.ndarray) -> Subspace:
    """Right null space of m as a subspace of its column domain.

    The rank cutoff is relative to max(largest singular value, 1): callers
    pass projector/unitary-derived matrices whose natural scale is 1, and a
    numerically-zero input must yield the full space, not amplified noise.
    """
    if m.shape[0] == 0:
        return Subspace.top(m.shape[1])
    u, s, vh = np.linalg.svd(m)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    rank = int(np.sum(s > RANK_TOL * scale))
    return Subspace(vh[rank:, :].conj().T)


def fixed_space(u: np.ndarray) -> Subspace:
    """Eigenspace of a unitary for eigenvalue 1."""
    return null_space(u - np.eye(u.shape[0], dtype=complex))


def support_space(rho: np.ndarray, eig_floor: float = 1e-10) -> Subspace:
    """Span of eigenvectors of a Hermitian PSD matrix above the floor."""
    herm = (rho + rho.conj().T) / 2
    vals, vecs = np.linalg.eigh(herm)
    cols = vecs[:, vals > eig_floor]
    return Subspace(cols) if cols.shape[1] else Subspace.bottom(rho.shape[0])


def psd_violation(rho: np.ndarray) -> float:
    """How far below zero the spectrum of the Hermitian part dips."""
    herm = (rho + rho.conj().T) / 2
    vals = np.linalg.eigvalsh(herm)
    return float(max(0.0, -(vals.min(initial=0.0))))
