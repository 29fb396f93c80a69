import numpy as np
import pytest

from spectral_boundary.discretization import discretize_1d_example, discretize_half_torus
from spectral_boundary.spectral import solve, solve_half_torus


@pytest.fixture(scope="session")
def fd512():
    R = discretize_1d_example(512, "fd")
    return R, solve(R)


@pytest.fixture(scope="session")
def basis128():
    R = discretize_1d_example(128, "basis")
    return R, solve(R)


@pytest.fixture(scope="session")
def small_torus():
    """Half-torus at N = 128, K = 32: quick, trusted window 16."""
    m = discretize_half_torus(128, 32)
    return m, solve_half_torus(m)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
