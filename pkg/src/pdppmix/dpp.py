"""Exact sampling of projection DPPs and their reduced Palm versions.

Points are drawn one at a time by rejection from a uniform proposal on the
domain.  The density of the next point given the points already drawn (and
any conditioning points) is proportional to the Schur complement
``K(z, z) - k(z)^T K^{-1} k(z)``, bounded above by ``m / vol``.  The Gram
factor grows by one row per accepted point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _numeric as nm
from .errors import NumericalError
from .kernel import FourierProjectionKernel, PalmKernel

DEFAULT_REJECTION_CAP = 10**7


@dataclass(frozen=True)
class DppSample:
    points: np.ndarray
    rejection_count: int

    def __len__(self):
        return len(self.points)


def _raise_for(status: int, drawn: int, wanted: int, cap: int):
    if status == nm.SINGULAR:
        raise NumericalError("conditioning points have a singular Gram matrix")
    if status == nm.CAP_EXCEEDED:
        raise NumericalError(
            f"rejection sampler exceeded {cap} proposals for one point after drawing "
            f"{drawn} of {wanted} points; the kernel is numerically degenerate"
        )


def _sample(base: FourierProjectionKernel, cond: np.ndarray, n_new: int, rng, cap: int) -> DppSample:
    lower, width, ell, inv_vol = base.params
    cond = np.ascontiguousarray(cond, dtype=float).reshape(-1, base.d)
    if n_new <= 0:
        return DppSample(np.zeros((0, base.d)), 0)
    pts, rejections, status = nm.sample_palm_points(
        cond, n_new, np.ascontiguousarray(lower), np.ascontiguousarray(width),
        ell, inv_vol, base.m, rng, cap,
    )
    _raise_for(status, len(pts), n_new, cap)
    return DppSample(pts, int(rejections))


def sample_projection_dpp(kernel: FourierProjectionKernel, rng, *, cap: int = DEFAULT_REJECTION_CAP) -> DppSample:
    """Draw the ``m`` points of the projection DPP with kernel ``kernel``."""
    return _sample(kernel, np.zeros((0, kernel.d)), kernel.m, rng, cap)


def sample_palm_dpp(palm: PalmKernel, rng, *, cap: int = DEFAULT_REJECTION_CAP) -> DppSample:
    """Draw the ``m - k`` points of the reduced Palm DPP; empty when ``k = m``."""
    return _sample(palm.base, palm.conditioning_points, palm.cardinality, rng, cap)
