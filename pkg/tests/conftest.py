import numpy as np
import pytest

from stripflow import Bathymetry, PhysParams, StripGrid


@pytest.fixture
def grid():
    return StripGrid(n_x=64, n_r=16)


@pytest.fixture
def fine_grid():
    return StripGrid(n_x=64, n_r=32)


@pytest.fixture
def params():
    return PhysParams(eps=0.3, beta=0.5, mu=1e-2, delta=0.2)


@pytest.fixture
def flat_setup(grid):
    params = PhysParams(eps=0.0, beta=0.0, mu=1e-2, delta=0.0)
    return grid, params, Bathymetry.flat(grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_band_limited(grid, rng, kmax=6, r_degree=3, amp=1.0):
    """Smooth random strip field: a few Fourier modes times an r-polynomial."""
    f = np.zeros((grid.n_r + 1,) + grid.xshape)
    x = grid.x
    r = grid.r[:, None]
    for k in range(kmax + 1):
        for p in range(r_degree + 1):
            a, b = rng.standard_normal(2) / (1 + k**2) / (1 + p)
            f += (a * np.cos(k * x) + b * np.sin(k * x))[None, :] * r**p
    return amp * f


def random_surface(grid, rng, kmax=6, amp=1.0):
    f = np.zeros(grid.xshape)
    for k in range(kmax + 1):
        a, b = rng.standard_normal(2) / (1 + k**2)
        f += a * np.cos(k * grid.x) + b * np.sin(k * grid.x)
    return amp * f
