import numpy as np
import pytest

from magnomech.config import build_scenario
from magnomech.presets import base_document

# Bose factors at 10 mK, 40-digit arithmetic with the exact SI h and k_B (frozen)
N_12MHZ_10MK = 16.868648247238703
N_17MHZ_10MK = 11.763632951954923
N_10GHZ_10MK = 1.4359924589903224e-21


def tmsv(r):
    """Two-mode squeezed vacuum covariance matrix (vacuum variance 1/2)."""
    c, s = 0.5 * np.cosh(2 * r), 0.5 * np.sinh(2 * r)
    return np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])


@pytest.fixture(scope="session")
def reference():
    """Scenario at the step-1 optimum with the reference system."""
    scenario, options, _ = build_scenario(base_document())
    return scenario


@pytest.fixture(scope="session")
def reference_params(reference):
    return reference.params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
