from pathlib import Path

import pytest

from jetvar.context import JetContext
from jetvar.problem import load_problem

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def javelin():
    return load_problem("javelin")


@pytest.fixture
def plate():
    return load_problem("plate")


@pytest.fixture
def mech_ctx():
    return JetContext(("t",), ("q1",), 2)


@pytest.fixture
def plane_ctx():
    return JetContext(("x", "y"), ("u1",), 2)
