import numpy as np
import pytest

from models import Kernel, Box, Design
from kriging.designs import grid_sequence
from utils.settings import get_settings


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    """Settings are cached per process; tests that set KRIGLAB_* see their own values."""
    monkeypatch.delenv("KRIGLAB_TRUNCATION_TOL", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def gaussian():
    return Kernel(family="gaussian", s2=1.0, alpha=1.0)


@pytest.fixture
def exponential():
    return Kernel(family="exponential", s2=1.0, alpha=1.0, beta=1.0)


@pytest.fixture
def matern15():
    return Kernel(family="matern", s2=1.0, nu=1.5, rho=1.0)


@pytest.fixture
def unit_grid():
    """Nested dyadic grid on [0, 1] of any size."""
    return lambda n: grid_sequence(Box.unit(1), n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_design():
    """Design over the bounding box of the given points."""
    def build(points) -> Design:
        arr = np.asarray(points, dtype=float)
        arr = arr.reshape(arr.shape[0], -1)
        box = Box(lower=arr.min(axis=0).tolist(), upper=arr.max(axis=0).tolist())
        return Design(points=arr.tolist(), box=box)
    return build
