import numpy as np
import pytest

from qrhlkit.types import BIT, CLASSICAL, QUANTUM, FiniteType, VarDecl
from qrhlkit.workspace import DoubledWorkspace, SingleSpace, Workspace

TRIT = FiniteType("trit", (0, 1, 2))


@pytest.fixture(scope="session")
def ws():
    """Standard corpus workspace: two classical bits, two qubits, aux marker."""
    return Workspace(
        [
            VarDecl("x", CLASSICAL, BIT),
            VarDecl("y", CLASSICAL, BIT),
            VarDecl("q", QUANTUM, BIT),
            VarDecl("r", QUANTUM, BIT),
        ],
        aux="qaux",
    )


@pytest.fixture(scope="session")
def dws(ws):
    return DoubledWorkspace(ws)


@pytest.fixture(scope="session")
def single(ws):
    return SingleSpace(ws)


@pytest.fixture(scope="session")
def ws3(ws):
    """Workspace with a classical trit added (for type-error cases)."""
    return Workspace(list(ws.decls) + [VarDecl("t", CLASSICAL, TRIT)], aux="qaux")


def parse(ws, text):
    from qrhlkit.parser import parse_program

    return parse_program(text, ws)


def pred(ws, text):
    from qrhlkit.parser import parse_pred

    return parse_pred(text, ws)
