import numpy as np
import pytest

from utils.bubble import CRITICAL_MASS
from utils.meanfield_solver import solve_newton
from utils.radial_core import make_grid

HALF_CRITICAL = 0.5 * CRITICAL_MASS


@pytest.fixture(scope='session')
def grid_513():
    return make_grid(513, 1.0)


@pytest.fixture(scope='session')
def graded_grid_2049():
    return make_grid(2049, 2.0)


@pytest.fixture(scope='session')
def half_critical(grid_513):
    report = solve_newton(HALF_CRITICAL, grid=grid_513)
    assert report.converged
    return report


@pytest.fixture(scope='session')
def refined_half_critical():
    """Converged solutions at 0.5 * 64 pi^2 on 1025 and 2049 uniform nodes."""
    solutions = {}
    for n in (1025, 2049):
        report = solve_newton(HALF_CRITICAL, tol=1e-9, grid=make_grid(n, 1.0))
        assert report.converged
        solutions[n] = report.field
    return solutions


@pytest.fixture
def rng():
    return np.random.default_rng(7)
