"""Finite types, variable declarations and the runtime values they range over.

Every classical variable is drawn from a finite, totally ordered value set;
every quantum variable's Hilbert space is spanned by the same kind of set.
The fixed value ordering defines the computational basis everywhere else in
the package, so it must never be mutated after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

Atom = Any  # int / bool / str; must be hashable and have a stable repr


@dataclass(frozen=True)
class FiniteType:
    """A named finite type with a fixed value ordering (the basis order)."""

    name: str
    values: tuple

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError(f"type {self.name} must have at least one value")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"type {self.name} has duplicate values")

    @property
    def size(self) -> int:
        return len(self.values)

    def index_of(self, value: Atom) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise ValueError(f"{value!r} is not a value of type {self.name}") from None

    def __repr__(self):
        return f"FiniteType({self.name})"


BOOL = FiniteType("bool", (False, True))
BIT = FiniteType("bit", (0, 1))


def int_mod_type(n: int) -> FiniteType:
    """The canonical type {0..n-1}; bit for n=2."""
    if n == 2:
        return BIT
    return FiniteType(f"int{n}", tuple(range(n)))


CLASSICAL = "classical"
QUANTUM = "quantum"


@dataclass(frozen=True)
class VarDecl:
    """A declared program variable.

    ``default`` indexes into ``ty.values`` and identifies the value a freshly
    initialized copy of the variable holds.  The aux-infinite marker variable
    used by the adversary rule is *not* represented here (see Workspace.aux).
    """

    name: str
    kind: str  # CLASSICAL | QUANTUM
    ty: FiniteType
    default: int = 0

    def __post_init__(self):
        if self.kind not in (CLASSICAL, QUANTUM):
            raise ValueError(f"bad variable kind {self.kind}")
        if not (0 <= self.default < self.ty.size):
            raise ValueError(f"default index {self.default} out of range for {self.ty.name}")
        if self.name and self.name[-1].isdigit():
            raise ValueError(
                f"variable name {self.name!r} must not end in a digit "
                "(digit suffixes are reserved for indexed variables)"
            )

    @property
    def is_classical(self) -> bool:
        return self.kind == CLASSICAL

    @property
    def is_quantum(self) -> bool:
        return self.kind == QUANTUM

    @property
    def default_value(self) -> Atom:
        return self.ty.values[self.default]

    def compatible(self, other: "VarDecl") -> bool:
        return self.kind == other.kind and self.ty == other.ty

    def __repr__(self):
        return f"{self.kind[0]}var({self.name}:{self.ty.name})"


# ---------------------------------------------------------------------------
# Runtime values beyond plain atoms/tuples.


@dataclass(frozen=True)
class Dist:
    """Subprobability distribution with exact rational weights, mass <= 1."""

    weights: tuple  # tuple of (value, Fraction), nonzero weights only, insertion order
    carrier_size: int = 0  # informational

    @staticmethod
    def of(mapping) -> "Dist":
        items = tuple((v, Fraction(w)) for v, w in mapping if Fraction(w) != 0)
        d = Dist(items)
        if d.total() > 1:
            raise ValueError("distribution mass exceeds 1")
        if any(w < 0 for _, w in items):
            raise ValueError("negative weight in distribution")
        return d

    def total(self) -> Fraction:
        return sum((w for _, w in self.weights), Fraction(0))

    def weight(self, value) -> Fraction:
        for v, w in self.weights:
            if v == value:
                return w
        return Fraction(0)

    def support(self) -> tuple:
        return tuple(v for v, _ in self.weights)

    def marginal(self, i: int) -> "Dist":
        acc: dict = {}
        for v, w in self.weights:
            acc[v[i]] = acc.get(v[i], Fraction(0)) + w
        return Dist.of(tuple(acc.items()))

    def __eq__(self, other):
        if not isinstance(other, Dist):
            return NotImplemented
        return dict(self.weights) == dict(other.weights)

    def __hash__(self):
        return hash(frozenset(self.weights))


class Meas:
    """Projective measurement: a map from outcomes to orthogonal projectors."""

    def __init__(self, projectors: dict):
        self.projectors = dict(projectors)
        dims = {p.shape for p in self.projectors.values()}
        if len(dims) != 1:
            raise ValueError("measurement projectors must share a dimension")
        (shape,) = dims
        if shape[0] != shape[1]:
            raise ValueError("projectors must be square")
        self.dim = shape[0]

    def outcomes(self) -> tuple:
        return tuple(self.projectors)

    def projector(self, outcome) -> np.ndarray:
        if outcome in self.projectors:
            return self.projectors[outcome]
        return np.zeros((self.dim, self.dim), dtype=complex)

    def is_total(self, tol: float = 1e-9) -> bool:
        s = sum(self.projectors.values())
        return bool(np.allclose(s, np.eye(self.dim), atol=tol))

    def validate(self, tol: float = 1e-9) -> None:
        s = np.zeros((self.dim, self.dim), dtype=complex)
        for p in self.projectors.values():
            if not np.allclose(p @ p, p, atol=tol) or not np.allclose(p, p.conj().T, atol=tol):
                raise ValueError("measurement operator is not an orthogonal projector")
            s = s + p
        eig = np.linalg.eigvalsh(s)
        if eig.max(initial=0.0) > 1 + tol:
            raise ValueError("measurement projectors sum beyond the identity")

    def approx_eq(self, other: "Meas", tol: float = 1e-9) -> bool:
        if self.dim != other.dim:
            return False
        keys = set(self.projectors) | set(other.projectors)
        return all(np.allclose(self.projector(k), other.projector(k), atol=tol) for k in keys)


def value_sort_key(v) -> tuple:
    """Stable ordering key for heterogeneous memory values."""
    if isinstance(v, tuple):
        return ("tuple", tuple(value_sort_key(x) for x in v))
    return (type(v).__name__, repr(v))
