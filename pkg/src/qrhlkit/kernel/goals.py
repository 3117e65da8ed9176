"""Judgments and the goal forms manipulated by the proof kernel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .. import ast as A
from .. import predicates as P
from ..ast import Program
from ..expr import Expr
from ..predicates import PredExpr
from ..semantics import CqOperator


@dataclass(frozen=True, eq=False)
class Judgment:
    pre: PredExpr
    left: Program
    right: Program
    post: PredExpr

    def pretty(self) -> str:
        return (
            "{ "
            + P.print_pred(self.pre)
            + " } "
            + A.print_program_line(self.left)
            + " ~ "
            + A.print_program_line(self.right)
            + " { "
            + P.print_pred(self.post)
            + " }"
        )


def judgment_equal(a: Judgment, b: Judgment) -> bool:
    return (
        P.pred_equal(a.pre, b.pre)
        and P.pred_equal(a.post, b.post)
        and A.program_equal(a.left, b.left)
        and A.program_equal(a.right, b.right)
    )


@dataclass(frozen=True, eq=False)
class Goal:
    pass


@dataclass(frozen=True, eq=False)
class QrhlGoal(Goal):
    j: Judgment

    def pretty(self) -> str:
        return "qrhl " + self.j.pretty()


@dataclass(frozen=True, eq=False)
class InclusionGoal(Goal):
    a: PredExpr
    b: PredExpr

    def pretty(self) -> str:
        return "inclusion " + P.print_pred(self.a) + "  <=  " + P.print_pred(self.b)


@dataclass(frozen=True, eq=False)
class DeneqGoal(Goal):
    c: Program
    d: Program

    def pretty(self) -> str:
        return "deneq " + A.print_program_line(self.c) + "  ==den  " + A.print_program_line(self.d)


@dataclass(frozen=True, eq=False)
class ProbGoal(Goal):
    """Pr[e : c(rho_l)] rel Pr[f : d(rho_r)] with a concrete input state."""

    e: Expr
    c: Program
    rho_l: CqOperator
    f: Expr
    d: Program
    rho_r: CqOperator
    rel: str  # '<=' | '=' | '>='

    def pretty(self) -> str:
        return (
            "prob Pr["
            + A.print_expr(self.e)
            + " : "
            + A.print_program_line(self.c)
            + "] "
            + self.rel
            + " Pr["
            + A.print_expr(self.f)
            + " : "
            + A.print_program_line(self.d)
            + "]"
        )


@dataclass(frozen=True, eq=False)
class Obligation(Goal):
    text: str

    def pretty(self) -> str:
        return "obligation " + self.text
