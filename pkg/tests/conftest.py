import numpy as np
import pytest

from kfoutage import RayleighChannel, SystemParams, solve_stationary

# (name, passed, detail) for every acceptance criterion that ran
ACCEPTANCE_LINES = []

NOMINAL = SystemParams(0.95, 1.0, 1.0)
HISTOGRAM_LAMBDAS = (1.0, 0.5, 0.25)


def record(name, passed, detail):
    """Remember one criterion outcome, echo it, then assert on it."""
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


_SOLVED = {}


def solved(params, lam, n_nodes=1024):
    """Cached stationary solution; the solver is deterministic so sharing is safe."""
    key = (params, lam, n_nodes)
    if key not in _SOLVED:
        _SOLVED[key] = solve_stationary(params, RayleighChannel(lam), n_nodes=n_nodes)
    return _SOLVED[key]


@pytest.fixture
def nominal():
    return NOMINAL


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
