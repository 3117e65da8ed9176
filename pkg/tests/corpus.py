"""The shared program corpus: handwritten programs plus a seeded generator.

The generator emits only well-typed, terminating programs (loop bodies force
their guard variable toward the exit value), so denotational comparisons on
the corpus never hit the iteration cutoff.
"""

from __future__ import annotations

import random

from qrhlkit import ast as A
from qrhlkit import expr as ex
from qrhlkit.parser import parse_program
from qrhlkit.types import BIT
from qrhlkit.workspace import Workspace

HANDWRITTEN = [
    "skip",
    "x <- 0",
    "x <- 1; y <- x",
    "x <- (x + 1 % 2)",
    "x <$ uniform(bit)",
    "x <$ uniform(bit); y <- x",
    "x <$ dist{0: 1/3, 1: 2/3}",
    "if x == 0 { y <- 1 } else { y <- 0 }",
    "if x == 1 { x <- 0 } else { skip }",
    "while x == 1 { x <- 0 }",
    "while x == 1 { x <$ uniform(bit) }",
    "q <q ket(0)",
    "q <q ket(1); on q apply H",
    "q, r <q vec[0.7071067811865476, 0, 0, 0.7071067811865476]",
    "on q apply H; on q, r apply CNOT",
    "on q apply (x == 1 ? H : I())",
    "x <m q with compmeas()",
    "on q apply H; x <m q with compmeas()",
    "x, y <m q, r with compmeas()",
    "local x; { x <- 1 }",
    "local x; { local x; { x <- 1 } }",
    "local x; { x <- 1; y <- x }",
    "local q; { q <q ket(1); on q apply H }",
    "local x; { local q; { q <q ket(0); x <m q with compmeas() } }",
    "{ local x; { x <- 0 } }; { local x; { x <- 1 } }",
    "local y; { y <$ uniform(bit); if y == 1 { x <- 1 } else { skip } }",
    "q <q ket(0); local r; { r <q ket(0); on q, r apply CNOT }",
    "while x == 1 { local y; { y <- 0; x <- y } }",
    "if x == 0 { local q; { q <q ket(0) } } else { on q apply X }",
    "x <- 0; y <- 0; q <q ket(0); r <q ket(0)",
    "y <- 1; x <m q with compmeas(); if x == 1 { on r apply X } else { skip }",
    "local r; { r <q ket(0); on q, r apply CNOT; r <q ket(0) }",
    "x <- 1; x <- 0",
]


def handwritten_programs(ws: Workspace) -> list:
    return [parse_program(t, ws) for t in HANDWRITTEN]


class ProgramGen:
    """Seeded random well-typed programs over the standard workspace."""

    def __init__(self, ws: Workspace, seed: int = 20240817):
        self.ws = ws
        self.rng = random.Random(seed)
        self.x = ws.var("x")
        self.y = ws.var("y")
        self.q = ws.var("q")
        self.r = ws.var("r")

    def bool_expr(self):
        rng = self.rng
        v = rng.choice([self.x, self.y])
        return ex.eq(ex.var(v), ex.const(rng.choice([0, 1]), BIT))

    def stmt(self, depth: int) -> A.Program:
        rng = self.rng
        choices = ["assign", "sample", "qinit", "qapply", "measure"]
        if depth > 1:
            choices += ["if", "while", "local", "seq"]
        kind = rng.choice(choices)
        if kind == "assign":
            v = rng.choice([self.x, self.y])
            e = rng.choice(
                [
                    ex.const(rng.choice([0, 1]), BIT),
                    ex.var(self.x if v is self.y else self.y),
                    ex.arith("+", ex.var(v), ex.const(1, BIT), 2),
                ]
            )
            return A.Assign((v,), e)
        if kind == "sample":
            v = rng.choice([self.x, self.y])
            return A.Sample((v,), ex.uniform(BIT))
        if kind == "qinit":
            qs = rng.choice([(self.q,), (self.r,), (self.q, self.r)])
            vals = tuple(rng.choice([0, 1]) for _ in qs)
            return A.QInit(qs, ex.ket(vals, tuple(d.ty for d in qs)))
        if kind == "qapply":
            import numpy as np

            if rng.random() < 0.5:
                qv = rng.choice([self.q, self.r])
                h = ex.op_lit(np.array([[1, 1], [1, -1]]) / np.sqrt(2), (BIT,), "H")
                xop = ex.op_lit(np.array([[0, 1], [1, 0]]), (BIT,), "X")
                return A.QApply(rng.choice([h, xop]), (qv,))
            cnot = ex.op_lit(
                np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), (BIT, BIT), "CNOT"
            )
            return A.QApply(cnot, (self.q, self.r))
        if kind == "measure":
            v = rng.choice([self.x, self.y])
            qv = rng.choice([self.q, self.r])
            return A.Measure((v,), (qv,), ex.comp_meas((BIT,)))
        if kind == "if":
            return A.If(self.bool_expr(), self.block(depth - 1), self.block(depth - 1))
        if kind == "while":
            guard_var = rng.choice([self.x, self.y])
            guard_val = rng.choice([0, 1])
            guard = ex.eq(ex.var(guard_var), ex.const(guard_val, BIT))
            body = self.block(depth - 1)
            exit_stmt = rng.choice(
                [
                    A.Assign((guard_var,), ex.const(1 - guard_val, BIT)),
                    A.Sample((guard_var,), ex.uniform(BIT)),
                ]
            )
            return A.While(guard, A.seq([body, exit_stmt]))
        if kind == "local":
            v = rng.choice([self.x, self.y, self.q, self.r])
            return A.Local(v, self.block(depth - 1))
        return self.block(depth - 1)

    def block(self, depth: int) -> A.Program:
        n = self.rng.randint(1, 3 if depth > 1 else 2)
        return A.seq([self.stmt(depth) for _ in range(n)])

    def program(self, depth: int = 4) -> A.Program:
        p = self.block(depth)
        assert not A.check_well_typed(p)
        return p


def generated_programs(ws: Workspace, count: int = 200, seed: int = 20240817) -> list:
    gen = ProgramGen(ws, seed)
    return [gen.program(depth=4) for _ in range(count)]
