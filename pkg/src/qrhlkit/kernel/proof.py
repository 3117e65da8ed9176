"""Proof sessions: a goal stack manipulated only through kernel rules.

Goals are closed in exactly three ways: a rule application with no premises,
a numeric discharge (inclusion / denotational-equivalence / probability
checks at pinned tolerances), or an explicit admit.  Every event appends a
line to the certificate, which is a deterministic, replayable record of the
derivation tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import analysis as an
from .. import ast as A
from .. import expr as ex
from .. import predicates as P
from ..ast import Program
from ..predicates import PredExpr
from ..semantics import CqOperator, deneq_check, pr_after
from ..types import VarDecl
from ..workspace import Workspace
from .goals import DeneqGoal, Goal, InclusionGoal, Judgment, Obligation, ProbGoal, QrhlGoal
from .rules import DischargedTotality, RuleContext, RuleError, apply_rule

CERT_HEADER = "qrhlkit certificate v1"
INCLUSION_TOL = 1e-9
DENEQ_TOL = 1e-9
PROB_TOL = 1e-9


class ProofError(Exception):
    pass


def _fmt_arg(v) -> str:
    if isinstance(v, VarDecl):
        return v.name
    if isinstance(v, PredExpr):
        return "{" + P.print_pred(v) + "}"
    if isinstance(v, Program):
        return "<" + A.print_program_line(v) + ">"
    if isinstance(v, ex.Expr):
        return A.print_expr(v)
    if isinstance(v, an.Substitution):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_arg(x) for x in v) + "]"
    if isinstance(v, CqOperator):
        return f"<state {len(v.branches)} branches>"
    return repr(v)


class ProofSession:
    """One lemma-at-a-time proof state over a fixed workspace."""

    def __init__(self, ws: Workspace, auto_discharge: bool = True):
        self.ws = ws
        self.ctx = RuleContext(ws)
        self.goals: list = []
        self.lemma_name: Optional[str] = None
        self.admitted = 0
        self.steps = 0
        self.auto_discharge = auto_discharge
        self.cert: list = []
        self.proved: dict = {}

    # -- certificate ---------------------------------------------------------

    def emit(self, line: str) -> None:
        self.cert.append(line)

    def certificate_text(self) -> str:
        return "\n".join(self.cert) + "\n"

    # -- lemma lifecycle -----------------------------------------------------

    def begin(self, name: str, goal: Goal) -> None:
        if self.lemma_name is not None:
            raise ProofError(f"lemma {self.lemma_name} is still open")
        self.lemma_name = name
        self.goals = [goal]
        self.admitted = 0
        self.steps = 0
        self.emit(f"lemma {name}: {goal.pretty()}")

    def qed(self) -> str:
        if self.lemma_name is None:
            raise ProofError("no open lemma")
        if self.goals:
            raise ProofError(f"{len(self.goals)} goal(s) remain")
        name = self.lemma_name
        self.emit(f"qed {name}: proved, admitted={self.admitted}")
        self.proved[name] = self.admitted
        self.lemma_name = None
        return name

    # -- goal access ---------------------------------------------------------

    def goal(self, i: int = 0) -> Goal:
        if not self.goals:
            raise ProofError("no goals")
        if not (0 <= i < len(self.goals)):
            raise ProofError(f"goal index {i} out of range")
        return self.goals[i]

    def goal_listing(self) -> str:
        if not self.goals:
            return "no goals"
        out = [f"{len(self.goals)} goal(s):"]
        for i, g in enumerate(self.goals):
            out.append(f"  [{i}] {g.pretty()}")
        return "\n".join(out)

    # -- the three ways to make progress -------------------------------------

    def apply(self, rule: str, at: int = 0, **args) -> list:
        goal = self.goal(at)
        subgoals = apply_rule(rule, self.ctx, goal, **args)
        self.steps += 1
        shown = ", ".join(f"{k}={_fmt_arg(v)}" for k, v in sorted(args.items()))
        self.emit(f"  step {self.steps}: rule {rule}" + (f" ({shown})" if shown else ""))
        self.emit(f"    on: {goal.pretty()}")
        if subgoals:
            for g in subgoals:
                self.emit(f"    -> {g.pretty()}")
        else:
            self.emit("    -> closed (axiomatic)")
        if self.ws.aux and rule == "Adversary":
            self.emit(f"    note: aux-infinite premise satisfied by marker variable {self.ws.aux}")
        self.goals[at : at + 1] = subgoals
        if self.auto_discharge:
            self.discharge_trivial()
        return subgoals

    def discharge_trivial(self) -> None:
        """Close freshly produced numeric side goals; leave real goals alone."""
        remaining = []
        for g in self.goals:
            if isinstance(g, InclusionGoal):
                ok, witness = self._check_inclusion(g)
                if ok:
                    continue
            elif isinstance(g, DeneqGoal):
                if self._check_deneq(g):
                    continue
            elif isinstance(g, DischargedTotality):
                self.emit(f"  discharge: {g.text}")
                continue
            remaining.append(g)
        self.goals = remaining

    def _check_inclusion(self, g: InclusionGoal) -> tuple:
        try:
            ok, witness = P.pred_inclusion_holds(g.a, g.b, self.ctx.dws, INCLUSION_TOL)
        except Exception as e:  # non-concrete predicate: leave the goal open
            return False, str(e)
        if ok:
            self.emit(f"  discharge inclusion: {g.pretty()}  [numeric, tol {INCLUSION_TOL:.0e}]")
        return ok, witness

    def _check_deneq(self, g: DeneqGoal) -> bool:
        res = deneq_check(g.c, g.d, self.ws, DENEQ_TOL)
        if res.equal:
            flag = " (while-loop cutoff reached)" if res.nonconvergent else ""
            self.emit(f"  discharge deneq: {g.pretty()}  [numeric, tol {DENEQ_TOL:.0e}]{flag}")
        return res.equal

    def discharge(self, i: int = 0) -> bool:
        """Numeric discharge of the focused goal; True when it closed."""
        g = self.goal(i)
        if isinstance(g, InclusionGoal):
            ok, witness = self._check_inclusion(g)
            if not ok:
                raise ProofError(f"inclusion does not hold (counterexample memories: {witness})")
        elif isinstance(g, DeneqGoal):
            if not self._check_deneq(g):
                raise ProofError("programs are not denotationally equivalent")
        elif isinstance(g, ProbGoal):
            self._check_prob(g)
        elif isinstance(g, Obligation):
            raise ProofError("opaque obligations can only be admitted")
        else:
            raise ProofError("relational goals are closed through rules, not numerically")
        del self.goals[i]
        return True

    def _check_prob(self, g: ProbGoal) -> None:
        lv, conv_l = pr_after(g.e, g.c, g.rho_l, self.ws)
        rv, conv_r = pr_after(g.f, g.d, g.rho_r, self.ws)
        if not (conv_l and conv_r):
            raise ProofError("probability evaluation did not converge")
        ok = {
            "<=": lv <= rv + PROB_TOL,
            "=": abs(lv - rv) <= PROB_TOL,
            ">=": lv + PROB_TOL >= rv,
        }[g.rel]
        if not ok:
            raise ProofError(f"probability relation fails: {lv!r} {g.rel} {rv!r}")
        self.emit(f"  discharge prob: {g.pretty()}  [numeric {lv:.9f} {g.rel} {rv:.9f}, tol {PROB_TOL:.0e}]")

    def admit(self, i: int = 0) -> None:
        g = self.goal(i)
        self.admitted += 1
        self.emit(f"  admit: {g.pretty()}")
        del self.goals[i]
