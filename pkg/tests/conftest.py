import numpy as np
import pytest
from hypothesis import settings

from parext.grid import SampledField, make_grid
from parext.operators import make_operator

settings.register_profile("parext", max_examples=25, deadline=None)
settings.load_profile("parext")


@pytest.fixture(scope="session")
def small_op():
    """Cheap handle for unit tests: L=8, N=64, 64 quadrature nodes."""
    return make_operator(make_grid(8.0, 64), n_t=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gaussian(grid, c1=0.0, c2=0.0, sigma=1.0, amp=1.0):
    x1, x2 = grid.mesh()
    return SampledField(grid, amp * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * sigma ** 2)))


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
