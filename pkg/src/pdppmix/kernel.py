"""Parameter domain, Fourier projection kernel and reduced Palm kernels."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.linalg import solve_triangular

from . import _numeric as nm
from .errors import DomainError, NumericalError, SingularConfigurationWarning

# Two points closer than this (relative to the side length, in every coordinate)
# are treated as the same point.
DISTINCT_RTOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in data units.

    The box is the image of ``[-1/2, 1/2]^d`` under ``x -> A x + b`` with
    ``A = diag(upper - lower)`` and ``b = (upper + lower) / 2``.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("domain bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError(f"need lower < upper in every coordinate, got {lower} and {upper}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.width)

    @property
    def b(self) -> np.ndarray:
        return 0.5 * (self.upper + self.lower)

    def volume(self) -> float:
        return float(np.prod(self.width))

    def to_unit(self, x):
        """Map points of the domain to ``[-1/2, 1/2]^d``."""
        return (np.asarray(x, dtype=float) - self.b) / self.width

    def from_unit(self, t):
        return self.b + np.asarray(t, dtype=float) * self.width

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        slack = 1e-12 * self.width
        return np.all((x >= self.lower - slack) & (x <= self.upper + slack), axis=1)

    def check(self, x) -> np.ndarray:
        """Return ``x`` as an ``(n, d)`` array, raising DomainError if any row is outside."""
        pts = _as_points(x, self.d)
        inside = self.contains(pts)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise DomainError(f"point {bad} lies outside the domain [{self.lower}, {self.upper}]")
        return pts

    def uniform(self, rng, size: int) -> np.ndarray:
        return self.lower + self.width * rng.random((size, self.d))


def _as_points(x, d: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim <= 1:
        pts = pts.reshape(-1, d)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got array of shape {np.shape(x)}")
    return pts


def has_duplicates(points, domain: Domain) -> bool:
    pts = _as_points(points, domain.d)
    if len(pts) < 2:
        return False
    gap = np.abs(pts[:, None, :] - pts[None, :, :]) / domain.width
    same = np.all(gap <= DISTINCT_RTOL, axis=2)
    np.fill_diagonal(same, False)
    return bool(same.any())


@dataclass(frozen=True)
class FourierProjectionKernel:
    """Projection kernel ``(1/vol) sum_{j in L^d} cos(2 pi j^T A^{-1}(x - y))``.

    ``L = {-ell, ..., ell}``, so the kernel has rank ``m = (2 ell + 1)^d``.  Over the
    full symmetric index set the cosine sum factorises into a product of
    one-dimensional Dirichlet sums, which is how it is evaluated.
    """

    domain: Domain
    ell: int

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 0:
            raise ValueError(f"ell must be a non-negative integer, got {self.ell}")
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def m(self) -> int:
        return (2 * self.ell + 1) ** self.d

    @property
    def inv_vol(self) -> float:
        return 1.0 / self.domain.volume()

    @property
    def diagonal(self) -> float:
        """Constant intensity ``m / vol``."""
        return self.m * self.inv_vol

    @property
    def params(self):
        """Arguments consumed by the compiled kernels."""
        return self.domain.lower, self.domain.width, self.ell, self.inv_vol

    def eval(self, x, y) -> float:
        x = self.domain.check(x)
        y = self.domain.check(y)
        if len(x) != 1 or len(y) != 1:
            raise ValueError("eval takes single points; use matrix() for sets")
        return float(nm.kernel_value(x[0], y[0], self.domain.width, self.ell, self.inv_vol))

    def matrix(self, X, Y=None) -> np.ndarray:
        X = self.domain.check(X)
        Y = X if Y is None else self.domain.check(Y)
        return nm.kernel_matrix(X, Y, self.domain.width, self.ell, self.inv_vol)

    def diag(self, X) -> np.ndarray:
        X = self.domain.check(X)
        return np.full(len(X), self.diagonal)


def eval_kernel(kernel: FourierProjectionKernel, x, y) -> float:
    return kernel.eval(x, y)


def gram_matrix(kernel: FourierProjectionKernel, points) -> np.ndarray:
    """Gram matrix ``[K(p_i, p_j)]``.

    Coincident points give a singular (but valid) matrix and trigger a
    :class:`SingularConfigurationWarning`.
    """
    pts = kernel.domain.check(points)
    if has_duplicates(pts, kernel.domain):
        warnings.warn("duplicate points: Gram matrix is singular", SingularConfigurationWarning, stacklevel=2)
    return kernel.matrix(pts)


class LogDet(NamedTuple):
    value: float
    positive: bool


def log_det_gram(kernel: FourierProjectionKernel, points) -> LogDet:
    """Log-determinant of the Gram matrix via its Cholesky factor.

    ``positive`` is False (and ``value`` is ``-inf``) when a pivot is
    numerically zero, e.g. for coincident points or more than ``m`` points.
    """
    pts = kernel.domain.check(points)
    n = len(pts)
    if n == 0:
        return LogDet(0.0, True)
    L = np.zeros((n, n))
    done = nm.gram_cholesky(pts, kernel.domain.width, kernel.ell, kernel.inv_vol, L)
    if done < n:
        return LogDet(-np.inf, False)
    return LogDet(float(2.0 * np.sum(np.log(np.diag(L)))), True)


@dataclass(frozen=True)
class PalmKernel:
    """Reduced Palm kernel ``K(x, y) - k(x)^T K_cc^{-1} k(y)`` at ``conditioning_points``.

    ``gram_factor`` is the lower Cholesky factor of the conditioning Gram matrix.
    """

    base: FourierProjectionKernel
    conditioning_points: np.ndarray
    gram_factor: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.conditioning_points)

    @property
    def cardinality(self) -> int:
        return self.base.m - self.k

    def _solve(self, X) -> np.ndarray:
        if self.k == 0:
            return np.zeros((0, len(X)))
        kx = self.base.matrix(X, self.conditioning_points)
        return solve_triangular(self.gram_factor, kx.T, lower=True)

    def eval(self, x, y) -> float:
        return float(self.matrix(x, y)[0, 0])

    def matrix(self, X, Y=None) -> np.ndarray:
        X = self.base.domain.check(X)
        Y = X if Y is None else self.base.domain.check(Y)
        vx = self._solve(X)
        vy = self._solve(Y)
        return self.base.matrix(X, Y) - vx.T @ vy

    def diag(self, X) -> np.ndarray:
        X = self.base.domain.check(X)
        if self.k == 0:
            return self.base.diag(X)
        return nm.palm_diagonal(
            X, self.conditioning_points, self.k, self.gram_factor,
            self.base.domain.width, self.base.ell, self.base.inv_vol,
        )


def make_palm(kernel: FourierProjectionKernel, conditioning_points) -> PalmKernel:
    """Reduced Palm kernel of ``kernel`` at a set of at most ``m`` distinct points."""
    d = kernel.d
    if conditioning_points is None or np.size(conditioning_points) == 0:
        pts = np.zeros((0, d))
    else:
        pts = kernel.domain.check(conditioning_points)
    k = len(pts)
    if k > kernel.m:
        raise ValueError(f"cannot condition on {k} points: kernel has rank m = {kernel.m}")
    L = np.zeros((k, k))
    if k:
        done = nm.gram_cholesky(pts, kernel.domain.width, kernel.ell, kernel.inv_vol, L)
        if done < k:
            raise NumericalError(
                "conditioning Gram matrix is singular (coincident points have prior density 0)"
            )
    pts = np.ascontiguousarray(pts)
    pts.flags.writeable = False
    L.flags.writeable = False
    return PalmKernel(kernel, pts, L)


def pair_correlation(kernel, x, y) -> float:
    """``1 - K(x, y)^2 / (K(x, x) K(y, y))``; 0 when either diagonal vanishes."""
    M = kernel.matrix(np.vstack([kernel_points(kernel, x), kernel_points(kernel, y)]))
    kxx, kyy, kxy = M[0, 0], M[1, 1], M[0, 1]
    if kxx <= 0.0 or kyy <= 0.0:
        return 0.0
    g = 1.0 - kxy * kxy / (kxx * kyy)
    return float(min(max(g, 0.0), 1.0))


def kernel_points(kernel, x) -> np.ndarray:
    base = kernel.base if isinstance(kernel, PalmKernel) else kernel
    return base.domain.check(x)


# ---------------------------------------------------------------------------
# Quadrature over the domain
# ---------------------------------------------------------------------------


def _gauss_grid(domain: Domain, nodes: int):
    t, w = np.polynomial.legendre.leggauss(nodes)
    axes = [domain.lower[e] + 0.5 * (t + 1.0) * domain.width[e] for e in range(domain.d)]
    weights = [0.5 * domain.width[e] * w for e in range(domain.d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.d)
    wgrid = np.ones(1)
    for we in weights:
        wgrid = np.multiply.outer(wgrid, we).ravel()
    return grid, wgrid


def integrate_over_domain(f, domain: Domain, *, nodes: int = 64, mc_draws: int = 200_000,
                          rng=None, tol: float = 1e-10):
    """Integrate a vectorised function ``f(points) -> values`` over the domain.

    Adaptive Gauss-Kronrod in one dimension, a tensor Gauss-Legendre grid in
    two, plain Monte Carlo beyond.  Returns ``(value, error_estimate)``.
    """
    if domain.d == 1:
        value, err = integrate.quad(
            lambda s: float(f(np.array([[s]]))[0]),
            domain.lower[0], domain.upper[0],
            epsabs=tol * 1e-3, epsrel=tol * 1e-3, limit=500,
        )
        if not err <= tol * max(1.0, abs(value)):
            raise NumericalError(f"quadrature did not converge: achieved error {err:.3g}")
        return value, err
    if domain.d == 2:
        grid, w = _gauss_grid(domain, nodes)
        coarse, wc = _gauss_grid(domain, nodes // 2)
        value = float(np.dot(w, f(grid)))
        err = abs(value - float(np.dot(wc, f(coarse))))
        return value, err
    rng = np.random.default_rng(0) if rng is None else rng
    pts = domain.uniform(rng, mc_draws)
    vals = f(pts) * domain.volume()
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(mc_draws))


def global_repulsiveness(kernel: FourierProjectionKernel, x, *, nodes: int = 64,
                         mc_draws: int = 200_000, rng=None, return_error: bool = False):
    """Global repulsiveness ``(1 / K(x, x)) * integral K(x, y)^2 dy``.

    Equal to 1 for every projection kernel.
    """
    x = kernel.domain.check(x)
    if len(x) != 1:
        raise ValueError("global_repulsiveness takes a single point")
    kxx = kernel.diagonal

    def integrand(Y):
        return kernel.matrix(x, Y)[0] ** 2

    value, err = integrate_over_domain(integrand, kernel.domain, nodes=nodes, mc_draws=mc_draws, rng=rng)
    if return_error:
        return value / kxx, err / kxx
    return value / kxx


def diagonal_integral(kernel, *, nodes: int = 64, mc_draws: int = 200_000, rng=None):
    """Integral of ``kernel.diag`` over the domain (the expected number of points)."""
    domain = kernel.base.domain if isinstance(kernel, PalmKernel) else kernel.domain
    return integrate_over_domain(kernel.diag, domain, nodes=nodes, mc_draws=mc_draws, rng=rng)
