"""Gamma jump family ``Ga(a_s, 1)`` and the auxiliary variable ``u``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(~np.isfinite(u)):
        raise ValueError(f"u must be finite and non-negative, got {u}")
    return u


def _check_count(n, name="n"):
    n = np.asarray(n)
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise ValueError(f"{name} must be a non-negative integer, got {n}")
    return n


@dataclass(frozen=True)
class GammaJumpModel:
    """Unnormalised weights ``s_h ~ Ga(a_s, 1)``.

    Laplace transform ``psi(u) = (1 + u)^{-a_s}`` and tilted moments
    ``kappa(u, n) = Gamma(n + a_s) / (Gamma(a_s) (1 + u)^{n + a_s})``.
    """

    a_s: float

    def __post_init__(self):
        if not (self.a_s > 0 and math.isfinite(self.a_s)):
            raise ValueError(f"a_s must be positive, got {self.a_s}")

    def log_psi(self, u):
        return -self.a_s * np.log1p(_check_u(u))

    def psi(self, u):
        return np.exp(self.log_psi(u))

    def log_kappa(self, u, n):
        u = _check_u(u)
        n = _check_count(n)
        return gammaln(n + self.a_s) - gammaln(self.a_s) - (n + self.a_s) * np.log1p(u)

    def kappa(self, u, n):
        return np.exp(self.log_kappa(u, n))

    def log_kappa_ratio(self, u, n):
        """``log kappa(u, n + 1) - log kappa(u, n) = log(n + a_s) - log(1 + u)``."""
        return np.log(_check_count(n) + self.a_s) - np.log1p(_check_u(u))

    def log_new_ratio(self, u):
        """``log kappa(u, 1) - log psi(u) = log a_s - log(1 + u)``."""
        return math.log(self.a_s) - np.log1p(_check_u(u))

    # -- sampling -----------------------------------------------------------

    def sample_active_jump(self, n_h, u, rng):
        """Jump of an occupied atom: ``Ga(n_h + a_s, 1 + u)``."""
        n_h = np.asarray(n_h)
        if np.any(n_h < 1):
            raise ValueError("active jumps need n_h >= 1; use sample_tilted_jump for empty atoms")
        u = _check_u(u)
        return rng.gamma(n_h + self.a_s, 1.0 / (1.0 + u))

    def sample_tilted_jump(self, u, rng, size=None):
        """Jump of an empty atom: ``Ga(a_s, 1 + u)``."""
        u = _check_u(u)
        return rng.gamma(self.a_s, 1.0 / (1.0 + u), size=size)

    def sample_u_marginal(self, n: int, m: int, rng) -> float:
        """Exact draw from ``f(u) ~ u^{n-1} (1 + u)^{-(a_s m + n)}``.

        ``v = u / (1 + u)`` is ``Beta(n, a_s m)``.
        """
        if n < 1 or m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        v = rng.beta(n, self.a_s * m)
        return float(v / (1.0 - v))

    def log_u_density(self, u, n: int, m: int):
        """Unnormalised log density of the marginal ``u`` posterior."""
        u = np.asarray(u, dtype=float)
        return (n - 1) * np.log(u) - (self.a_s * m + n) * np.log1p(u)


def sample_u_conditional(n: int, total_jump: float, rng) -> float:
    """``u | s ~ Ga(n, sum_h s_h)`` (shape ``n``, rate ``total_jump``)."""
    if not total_jump > 0:
        raise ValueError(f"total jump must be positive, got {total_jump}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return float(rng.gamma(n, 1.0 / total_jump))


def sample_u_marginal(n: int, m: int, a_s: float, rng) -> float:
    return GammaJumpModel(a_s).sample_u_marginal(n, m, rng)
