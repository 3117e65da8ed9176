"""Finite workspaces: the declared variables and their enumeration order.

The declaration order is the global variable ordering: it fixes the
enumeration of classical memories and the tensor-slot order of the quantum
factor.  The doubled workspace (for relational predicates) lists all
1-indexed copies first, then all 2-indexed ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .types import CLASSICAL, QUANTUM, FiniteType, VarDecl, value_sort_key

DEFAULT_BUDGET = 4096


class BudgetExceeded(Exception):
    pass


class Workspace:
    def __init__(self, decls, aux: Optional[str] = None, budget: int = DEFAULT_BUDGET):
        self.decls = tuple(decls)
        names = [d.name for d in self.decls]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable declaration")
        self.aux = aux
        if aux is not None and aux in names:
            raise ValueError("aux-infinite marker variable must not carry a finite declaration")
        self.budget = budget
        self.by_name = {d.name: d for d in self.decls}
        self.classical = tuple(d for d in self.decls if d.is_classical)
        self.quantum = tuple(d for d in self.decls if d.is_quantum)
        self._cindex = {d.name: i for i, d in enumerate(self.classical)}
        self._qindex = {d.name: i for i, d in enumerate(self.quantum)}
        self.qdims = tuple(d.ty.size for d in self.quantum)
        self.qdim = 1
        for s in self.qdims:
            self.qdim *= s
        n_mem = 1
        for d in self.classical:
            n_mem *= d.ty.size
        self.n_memories = n_mem
        if self.qdim > budget or n_mem > budget:
            raise BudgetExceeded(
                f"workspace needs {self.qdim} amplitudes and {n_mem} classical memories; budget is {budget}"
            )

    def var(self, name: str) -> VarDecl:
        try:
            return self.by_name[name]
        except KeyError:
            raise KeyError(f"undeclared variable {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self.by_name

    def classical_pos(self, name: str) -> int:
        return self._cindex[name]

    def quantum_pos(self, name: str) -> int:
        return self._qindex[name]

    def memories(self):
        """All classical memories as value tuples in declaration order."""
        return itertools.product(*[d.ty.values for d in self.classical])

    def default_memory(self) -> tuple:
        return tuple(d.default_value for d in self.classical)

    def mem_get(self, mem: tuple, name: str):
        return mem[self._cindex[name]]

    def mem_set(self, mem: tuple, names, values) -> tuple:
        out = list(mem)
        if len(names) == 1:
            values = (values,)
        for n, v in zip(names, values):
            out[self._cindex[n.name if isinstance(n, VarDecl) else n]] = v
        return tuple(out)

    def extend(self, decl: VarDecl, budget_check: bool = True) -> "Workspace":
        ws = Workspace.__new__(Workspace)
        Workspace.__init__(ws, self.decls + (decl,), aux=self.aux, budget=self.budget if budget_check else 10**9)
        return ws

    def env(self, mem: tuple):
        """Expression environment for a single-sided memory (index 0 refs)."""
        cindex = self._cindex

        class _Env:
            def __getitem__(_, key):
                name, idx = key
                if idx != 0:
                    raise KeyError(f"indexed variable {name}{idx} in a single-sided context")
                return mem[cindex[name]]

        return _Env()

    def __repr__(self):
        parts = ", ".join(f"{d.name}:{d.ty.name}({d.kind[0]})" for d in self.decls)
        return f"Workspace[{parts}]" + (f" aux={self.aux}" if self.aux else "")


class DoubledWorkspace:
    """Two indexed copies of a base workspace, 1-side first, for predicates."""

    def __init__(self, base: Workspace):
        self.base = base
        self.budget = base.budget
        self.classical = tuple((d, i) for i in (1, 2) for d in base.classical)
        self.quantum = tuple((d, i) for i in (1, 2) for d in base.quantum)
        self._cindex = {(d.name, i): k for k, (d, i) in enumerate(self.classical)}
        self._qindex = {(d.name, i): k for k, (d, i) in enumerate(self.quantum)}
        self.qdims = tuple(d.ty.size for d, _ in self.quantum)
        self.qdim = 1
        for s in self.qdims:
            self.qdim *= s
        if self.qdim > base.budget:
            raise BudgetExceeded(f"doubled workspace needs {self.qdim} amplitudes; budget is {base.budget}")

    def quantum_pos(self, name: str, idx: int) -> int:
        return self._qindex[(name, idx)]

    def memory_pairs(self):
        for m1 in self.base.memories():
            for m2 in self.base.memories():
                yield m1, m2

    def env(self, *mems):
        m1, m2 = mems
        base = self.base

        class _Env:
            def __getitem__(_, key):
                name, idx = key
                if idx == 1:
                    return base.mem_get(m1, name)
                if idx == 2:
                    return base.mem_get(m2, name)
                raise KeyError(f"unindexed variable {name} in a relational context")

        return _Env()

    def side_slots(self, idx: int) -> list:
        return [k for k, (_, i) in enumerate(self.quantum) if i == idx]

    def split_branch_key(self, mem_key: tuple) -> tuple:
        n = len(self.base.classical)
        return (mem_key[:n], mem_key[n:])


class SingleSpace:
    """Duck-typed predicate space over one unindexed copy of a workspace."""

    def __init__(self, base: Workspace):
        self.base = base
        self.qdims = base.qdims
        self.qdim = base.qdim

    def quantum_pos(self, name: str, idx: int) -> int:
        if idx != 0:
            raise KeyError(f"indexed variable {name}{idx} in a single-sided predicate")
        return self.base.quantum_pos(name)

    def memory_pairs(self):
        for m in self.base.memories():
            yield (m,)

    def env(self, *mems):
        (m,) = mems
        return self.base.env(m)

    def split_branch_key(self, mem_key: tuple) -> tuple:
        return (mem_key,)


def sorted_memories(mems):
    return sorted(mems, key=lambda m: tuple(value_sort_key(v) for v in m))
