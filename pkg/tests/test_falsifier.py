"""Falsifier: soundness, the two required refutations, classical completeness.

The classical-completeness oracle here is independent of the falsifier's LP:
feasibility of a transportation problem with forbidden cells is decided by
brute-force enumeration of Hall's condition over all subsets of the left
support (Gale's theorem).
"""

import itertools

import numpy as np
import pytest

from qrhlkit import predicates as P
from qrhlkit.falsifier import ppt_falsify, product_spanning_inputs
from qrhlkit.kernel.goals import Judgment
from qrhlkit.parser import parse_pred, parse_program
from qrhlkit.semantics import CqOperator, apply_denot
from qrhlkit.types import BIT, CLASSICAL, QUANTUM, FiniteType, VarDecl
from qrhlkit.workspace import DoubledWorkspace, Workspace


def wsc():
    return Workspace([VarDecl("x", CLASSICAL, BIT)])


def wsq():
    return Workspace([VarDecl("q", QUANTUM, BIT)])


def wsqr():
    return Workspace([VarDecl("q", QUANTUM, BIT), VarDecl("r", QUANTUM, BIT)])


def judgment(ws, pre, left, right, post):
    return Judgment(parse_pred(pre, ws), parse_program(left, ws), parse_program(right, ws), parse_pred(post, ws))


# -- the two required refutations ------------------------------------------------


def test_uniform_vs_constant_refuted():
    ws = wsc()
    j = judgment(ws, "top", "x <$ uniform(bit)", "x <- 0", "CL[x1 == x2]")
    rep = ppt_falsify(j, ws)
    assert rep.refuted
    assert rep.verdict == "refuted"


def test_distinct_unitaries_refuted():
    ws = wsq()
    j = judgment(ws, "qeq(q1, q2)", "on q apply I()", "on q apply X", "qeq(q1, q2)")
    rep = ppt_falsify(j, ws)
    assert rep.refuted


# -- soundness: never refute kernel-derived judgments ------------------------------


def kernel_derived_judgments():
    ws = wsqr()
    out = [
        (ws, judgment(ws, "qeq(q1 r1, q2 r2)", "r <q ket(0)", "r <q ket(0)", "qeq(q1, q2)")),
        (
            ws,
            judgment(
                ws,
                "qeq(q1, q2)",
                "r <q ket(0); on q, r apply CNOT",
                "r <q ket(0); on q, r apply CNOT",
                "qeq(q1 r1, q2 r2)",
            ),
        ),
        (ws, judgment(ws, "qeq(q1, q2)", "on q apply H", "on q apply H", "qeq(q1, q2)")),
    ]
    wc = wsc()
    out.append((wc, judgment(wc, "CL[x1 == x2]", "x <- (x + 1 % 2)", "x <- (x + 1 % 2)", "CL[x1 == x2]")))
    out.append((wc, judgment(wc, "top", "x <$ uniform(bit)", "x <$ uniform(bit)", "CL[x1 == x2]")))
    return out


def test_soundness_on_kernel_derived_corpus():
    for ws, j in kernel_derived_judgments():
        rep = ppt_falsify(j, ws)
        assert not rep.refuted, (j.pretty(), rep.details)


def test_determinism():
    ws = wsq()
    j = judgment(ws, "qeq(q1, q2)", "on q apply I()", "on q apply X", "qeq(q1, q2)")
    a = ppt_falsify(j, ws)
    b = ppt_falsify(j, ws)
    assert a.verdict == b.verdict and a.iterations == b.iterations and a.residuals == b.residuals


# -- classical path vs the Hall-condition oracle -----------------------------------


def hall_feasible(p1: dict, p2: dict, allowed: set, tol: float = 1e-9) -> bool:
    """Transportation feasibility by enumerating Hall's condition."""
    if abs(sum(p1.values()) - sum(p2.values())) > tol:
        return False
    left = [k for k, v in p1.items() if v > tol]
    for rsize in range(1, len(left) + 1):
        for subset in itertools.combinations(left, rsize):
            supply = sum(p1[k] for k in subset)
            neighbors = {m2 for (m1, m2) in allowed if m1 in subset}
            capacity = sum(p2.get(m2, 0.0) for m2 in neighbors)
            if supply > capacity + tol:
                return False
    return True


def classical_case(ws, pre, left, right, post):
    j = judgment(ws, pre, left, right, post)
    dws = DoubledWorkspace(ws)
    rep = ppt_falsify(j, ws)
    # oracle: recompute the transportation instance for each input and check
    inputs = product_spanning_inputs(j.pre, dws)
    oracle_refuted = False
    for rho in inputs:
        if not P.satisfies(rho, j.pre, dws):
            continue
        n = len(ws.classical)
        lmarg = CqOperator(ws)
        rmarg = CqOperator(ws)
        for key, mat in rho.branches.items():
            lmarg.add_branch(key[:n], mat)
            rmarg.add_branch(key[n:], mat)
        out_l, _ = apply_denot(j.left, lmarg, ws)
        out_r, _ = apply_denot(j.right, rmarg, ws)
        p1 = {k: float(np.real(v[0, 0])) for k, v in out_l.branches.items()}
        p2 = {k: float(np.real(v[0, 0])) for k, v in out_r.branches.items()}
        allowed = set()
        for m1 in p1:
            for m2 in p2:
                if P.eval_pred(j.post, (m1, m2), dws).dim > 0:
                    allowed.add((m1, m2))
        if not hall_feasible(p1, p2, allowed):
            oracle_refuted = True
            break
    assert rep.refuted == oracle_refuted, (pre, left, right, post, rep.details)
    return rep.refuted


def test_classical_agreement_with_bruteforce():
    ws = wsc()
    cases = [
        ("top", "x <$ uniform(bit)", "x <- 0", "CL[x1 == x2]", True),
        ("top", "x <$ uniform(bit)", "x <$ uniform(bit)", "CL[x1 == x2]", False),
        # diagonal support forces the marginals to coincide pointwise
        ("top", "x <$ uniform(bit)", "x <$ dist{0: 1/3, 1: 2/3}", "CL[x1 == x2]", True),
        ("top", "x <$ uniform(bit)", "x <$ uniform(bit)", "CL[!(x1 == x2)]", False),
        ("top", "x <- 0", "x <- 1", "CL[x1 == x2]", True),
        ("top", "x <- 0", "x <- 1", "CL[!(x1 == x2)]", False),
        ("top", "x <$ dist{0: 3/4, 1: 1/4}", "x <$ uniform(bit)", "CL[x1 == x2 || x1 == 0]", False),
        ("top", "x <$ dist{0: 3/4, 1: 1/4}", "x <$ uniform(bit)", "CL[x1 == x2]", True),
        ("top", "x <$ dist{0: 1/2}", "x <$ uniform(bit)", "top", True),  # mass mismatch
        ("CL[x1 == x2]", "skip", "skip", "CL[x1 == x2]", False),
    ]
    for pre, left, right, post, expect in cases:
        got = classical_case(ws, pre, left, right, post)
        assert got == expect, (pre, left, right, post)


def test_trit_classical_case():
    ws = Workspace([VarDecl("t", CLASSICAL, FiniteType("trit", (0, 1, 2)))])
    refuted = classical_case(
        ws, "top", "t <$ dist{0: 1/3, 1: 1/3, 2: 1/3}", "t <$ dist{0: 1/2, 1: 1/2}", "CL[t1 == t2]"
    )
    assert refuted  # mass on outcome 2 cannot be matched


# -- input generation ---------------------------------------------------------------


def test_product_inputs_satisfy_pre():
    ws = wsqr()
    dws = DoubledWorkspace(ws)
    pre = parse_pred("qeq(q1 r1, q2 r2)", ws)
    inputs = product_spanning_inputs(pre, dws)
    assert inputs
    for rho in inputs:
        rho.assert_state()
        assert P.satisfies(rho, pre, dws)


def test_product_inputs_span_symmetric_subspace():
    ws = wsq()
    dws = DoubledWorkspace(ws)
    pre = parse_pred("qeq(q1, q2)", ws)
    inputs = product_spanning_inputs(pre, dws)
    from qrhlkit.linalg import Subspace, support_space

    total = np.zeros((4, 4), dtype=complex)
    for rho in inputs:
        total += rho.branch(())
    span = support_space(total)
    target = P.eval_pred(pre, ((), ()), dws)
    assert span.equals(target)
