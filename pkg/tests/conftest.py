import numpy as np
import pytest

from kbeta.reduction_geometry import ReducedPotential, SGrid
from kbeta.seeds import corpus, seed_bump


@pytest.fixture(scope="session")
def grid():
    return SGrid.symmetric()


@pytest.fixture(scope="session")
def small_grid():
    return SGrid.symmetric(20.0, 401)


@pytest.fixture(scope="session")
def bump(grid):
    return seed_bump(grid)


@pytest.fixture(scope="session")
def zero(grid):
    return ReducedPotential.zeros(grid)


@pytest.fixture(scope="session")
def seeds(grid):
    return corpus(grid, seed=0)


@pytest.fixture(scope="session")
def small_seeds(small_grid):
    return corpus(small_grid, seed=1, n_harmonic=4, n_profile=4)


def max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
# ---------------------------------------------------------------------------
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
