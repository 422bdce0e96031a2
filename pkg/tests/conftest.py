import numpy as np
import pytest

from pdppmix.kernel import Domain, FourierProjectionKernel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_kernel():
    """``ell = 1`` on ``[-1/2, 1/2]``: m = 3, constant intensity 3."""
    return FourierProjectionKernel(Domain([-0.5], [0.5]), 1)


def cosine_kernel(x, y, lower, upper, ell):
    """Independent oracle: explicit sum over the full frequency lattice."""
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    lower, upper = np.atleast_1d(lower), np.atleast_1d(upper)
    width = upper - lower
    d = len(x)
    grids = np.meshgrid(*[np.arange(-ell, ell + 1)] * d, indexing="ij")
    J = np.stack([g.ravel() for g in grids], axis=1)
    return float(np.sum(np.cos(2 * np.pi * J @ ((x - y) / width))) / np.prod(width))
