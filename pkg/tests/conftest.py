import sys

import numpy as np
import pytest

from gradctl.controllers import ZeroController
from gradctl.plants import ClosedLoopSystem, QuadraticLoss, make_linear_plant


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_system():
    """xdot = -x, u = 0, L = x^2: J = x^2/2 and gradJ = x."""
    plant = make_linear_plant([[-1.0]], [[1.0]])
    return ClosedLoopSystem(plant, QuadraticLoss([[1.0]], [[1.0]]), ZeroController(1))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
