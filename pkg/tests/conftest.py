import numpy as np
import pytest

from truncprod.core import EnsembleParams

# parameter sweep shared by the weight and moment checks
SWEEP = [EnsembleParams.equal(1, m, l) for m in range(1, 5) for l in range(1, 7)]
UNEQUAL = [EnsembleParams(1, 2, (1, 3)), EnsembleParams(1, 3, (1, 2, 3)), EnsembleParams(1, 4, (2, 2, 5, 1))]


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


# one line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
