"""Simulated data: equally weighted mixtures of three Student's t (6 d.o.f.)."""

from __future__ import annotations

import numpy as np

DOF = 6.0

LOCATIONS = {
    "t3_1d": np.array([[-4.0], [0.0], [4.0]]),
    "t3_2d": np.array([[-4.0, 4.0], [0.0, 0.0], [4.0, 4.0]]),
    "t3_4d": np.array([[-4.0, -4.0, 4.0, 4.0], [0.0, 0.0, 0.0, 0.0], [4.0, 4.0, 4.0, 4.0]]),
}

GENERATORS = tuple(LOCATIONS)


def simulate(name: str, n: int, rng, *, return_labels: bool = False):
    """``n`` draws from the named generator (identity scale, 6 d.o.f.).

    With ``return_labels`` the 0-based component of each draw is returned too.
    """
    if name not in LOCATIONS:
        raise ValueError(f"unknown generator {name!r}; choose one of {', '.join(GENERATORS)}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    mu = LOCATIONS[name]
    d = mu.shape[1]
    labels = rng.integers(0, len(mu), size=n)
    z = rng.standard_normal((n, d))
    w = rng.chisquare(DOF, size=n)
    y = mu[labels] + z / np.sqrt(w / DOF)[:, None]
    return (y, labels) if return_labels else y


def true_density(name: str, x) -> np.ndarray:
    """Density of the named generator at the rows of ``x``."""
    from scipy.stats import multivariate_t

    mu = LOCATIONS[name]
    x = np.asarray(x, dtype=float).reshape(-1, mu.shape[1])
    return sum(multivariate_t(loc=m, shape=np.eye(len(m)), df=DOF).pdf(x).reshape(-1) for m in mu) / len(mu)
