"""Gaussian location-scale mixture layer.

Inverse-Wishart convention: ``InvWi(nu, Psi)`` has density proportional to
``|S|^{-(nu + d + 1)/2} exp(-tr(Psi S^{-1}) / 2)`` and mean ``Psi / (nu - d - 1)``,
so the conjugate update adds the cluster size to ``nu`` and the scatter to
``Psi``.  In one dimension ``InvWi(nu, Psi)`` is the inverse gamma with shape
``nu / 2`` and scale ``Psi / 2`` (density ``~ x^{-a-1} e^{-b/x}``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _numeric as nm
from .errors import DataError
from .kernel import Domain, has_duplicates


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise DataError(f"data must be an n x d array with n >= 1, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise DataError("data contain non-finite entries")
        y = np.ascontiguousarray(y)
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class Hyperparameters:
    """Prior and proposal settings shared by all samplers."""

    a_s: float = 0.1
    ell: int = 5
    tau: float = 2.0
    omega: np.ndarray = field(default_factory=lambda: np.array([[6.0]]))
    domain_expansion: float = 3.0
    proposal_local_weight: float = 0.9
    proposal_local_var: float = 0.01
    neal8_T: int = 3
    # Include the proposal-density ratio for the Palm component of the atom moves.
    hastings_correction: bool = True

    def __post_init__(self):
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float)).copy()
        omega.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "neal8_T", int(self.neal8_T))
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self) -> list[str]:
        out = []
        d = self.omega.shape[0]
        if not self.a_s > 0:
            out.append(f"a_s must be positive (got {self.a_s})")
        if self.ell < 0:
            out.append(f"ell must be non-negative (got {self.ell})")
        if self.omega.shape != (d, d) or not np.allclose(self.omega, self.omega.T):
            out.append("omega must be a symmetric square matrix")
        elif np.any(np.linalg.eigvalsh(self.omega) <= 0):
            out.append("omega must be positive definite")
        if not self.tau > d - 1:
            out.append(f"tau must exceed d - 1 = {d - 1} (got {self.tau})")
        if not self.domain_expansion > 0:
            out.append(f"domain_expansion must be positive (got {self.domain_expansion})")
        if not 0 < self.proposal_local_weight < 1:
            out.append(f"proposal_local_weight must lie in (0, 1) (got {self.proposal_local_weight})")
        if not self.proposal_local_var > 0:
            out.append(f"proposal_local_var must be positive (got {self.proposal_local_var})")
        if self.neal8_T < 1:
            out.append(f"neal8_T must be at least 1 (got {self.neal8_T})")
        return out

    @property
    def d(self) -> int:
        return self.omega.shape[0]

    @classmethod
    def default_for(cls, d: int, **overrides) -> "Hyperparameters":
        """Defaults used in the simulation studies.

        ``d = 1``: ``ell = 5``, ``a_s = 0.1``, variance prior ``InvGa(1, 3)``,
        domain ``mean +- 3 * radius``.  ``d >= 2``: ``ell = 1``, ``a_s = 0.1``,
        ``InvWi(d + 2, I)``, domain ``mean +- 2.5 * radius``.
        """
        if d == 1:
            base = dict(a_s=0.1, ell=5, tau=2.0, omega=np.array([[6.0]]), domain_expansion=3.0)
        else:
            base = dict(a_s=0.1, ell=1, tau=d + 2.0, omega=np.eye(d), domain_expansion=2.5)
        base.update(overrides)
        return cls(**base)

    @staticmethod
    def inverse_gamma(shape: float, scale: float) -> tuple[float, np.ndarray]:
        """``(tau, omega)`` equivalent to ``InvGa(shape, scale)`` in one dimension."""
        return 2.0 * shape, np.array([[2.0 * scale]])


def build_domain(dataset: Dataset, expansion: float) -> Domain:
    """Box ``mean_e +- expansion * max_i |y_ie - mean_e|`` around the data."""
    if not expansion > 0:
        raise ValueError(f"expansion must be positive, got {expansion}")
    y = dataset.y
    centre = y.mean(axis=0)
    radius = np.max(np.abs(y - centre), axis=0)
    flat = np.flatnonzero(radius == 0)
    if flat.size:
        raise DataError(
            f"coordinate(s) {flat.tolist()} are constant; jitter or drop them before fitting"
        )
    return Domain(centre - expansion * radius, centre + expansion * radius)


def _chol(cov) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = np.zeros_like(cov)
    if cov.shape[0] != cov.shape[1] or not nm.cholesky_small(cov, L):
        raise ValueError("covariance is not symmetric positive definite")
    return L


def mvn_logpdf(y, mean, cov) -> float:
    """Multivariate normal log density."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = _chol(cov)
    return float(nm.mvn_logpdf_chol(y, mean, L, nm.half_logdet_chol(L)))


def mvn_logpdf_rows(Y, mean, L, half_logdet) -> np.ndarray:
    """Vectorised log density of every row of ``Y`` given a Cholesky factor."""
    Z = solve_triangular(L, (Y - mean).T, lower=True)
    d = Y.shape[1]
    return -0.5 * np.sum(Z * Z, axis=0) - half_logdet - 0.5 * d * nm.LOG_2PI


def sample_inverse_wishart(tau: float, omega, rng) -> np.ndarray:
    """One draw from ``InvWi(tau, omega)`` via the Bartlett decomposition."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    d = omega.shape[0]
    if not tau > d - 1:
        raise ValueError(f"tau must exceed d - 1 = {d - 1}, got {tau}")
    out = np.empty((d, d))
    nm.inverse_wishart_draw(float(tau), _chol(omega), rng, out)
    return out


def posterior_cov_params(cluster_data, location, tau: float, omega) -> tuple[float, np.ndarray]:
    """``(n_h + tau, omega + sum_i (y_i - loc)(y_i - loc)^T)``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    d = omega.shape[0]
    Y = np.asarray(cluster_data, dtype=float).reshape(-1, d)
    R = Y - np.asarray(location, dtype=float).reshape(1, d)
    return tau + len(Y), omega + R.T @ R


@dataclass
class ComponentSet:
    """Atoms ``phi_h``, covariances ``Sigma_h`` and jumps ``s_h`` of the m components."""

    locations: np.ndarray
    covariances: np.ndarray
    jumps: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)
    half_logdet: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.locations = np.ascontiguousarray(self.locations, dtype=float)
        self.covariances = np.ascontiguousarray(self.covariances, dtype=float)
        self.jumps = np.ascontiguousarray(self.jumps, dtype=float)
        m, d = self.locations.shape
        self.chol = np.zeros((m, d, d))
        self.half_logdet = np.zeros(m)
        for h in range(m):
            self.refresh(h)

    @property
    def m(self) -> int:
        return self.locations.shape[0]

    @property
    def d(self) -> int:
        return self.locations.shape[1]

    def refresh(self, h: int):
        """Recompute the cached Cholesky factor of covariance ``h``."""
        if not nm.cholesky_small(self.covariances[h], self.chol[h]):
            raise ValueError(f"covariance {h} is not positive definite")
        self.half_logdet[h] = nm.half_logdet_chol(self.chol[h])

    def set_covariance(self, h: int, cov):
        self.covariances[h] = cov
        self.refresh(h)

    def copy(self) -> "ComponentSet":
        return ComponentSet(self.locations.copy(), self.covariances.copy(), self.jumps.copy())


@dataclass
class MixtureState:
    """Full sampler state.

    ``allocations`` holds 0-based component labels (files and traces use 1-based
    labels).  Active components are those with at least one allocation; they
    are derived from the allocations, never stored separately.
    """

    components: ComponentSet
    allocations: np.ndarray
    u: float = 1.0

    def __post_init__(self):
        self.allocations = np.ascontiguousarray(self.allocations, dtype=np.int64)

    @property
    def m(self) -> int:
        return self.components.m

    @property
    def n(self) -> int:
        return len(self.allocations)

    def counts(self) -> np.ndarray:
        return np.bincount(self.allocations, minlength=self.m)

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.counts() > 0)

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.counts()))

    def weights(self) -> np.ndarray:
        s = self.components.jumps
        return s / s.sum()

    def copy(self) -> "MixtureState":
        return MixtureState(self.components.copy(), self.allocations.copy(), self.u)

    def log_likelihood(self, dataset: Dataset) -> float:
        total = 0.0
        comp = self.components
        for h in self.active_ids():
            rows = dataset.y[self.allocations == h]
            total += float(np.sum(mvn_logpdf_rows(rows, comp.locations[h], comp.chol[h], comp.half_logdet[h])))
        return total


def check_state(state: MixtureState, domain: Domain, *, marginal: bool = False) -> None:
    """Assert the state invariants; raises AssertionError on violation.

    For marginal samplers only the active components carry meaning.
    """
    comp = state.components
    counts = state.counts()
    assert counts.sum() == state.n
    assert np.all((state.allocations >= 0) & (state.allocations < state.m))
    ids = np.flatnonzero(counts > 0) if marginal else np.arange(state.m)
    assert 1 <= len(np.flatnonzero(counts > 0)) <= min(state.m, state.n)
    assert np.all(domain.contains(comp.locations[ids]))
    assert not has_duplicates(comp.locations[ids], domain)
    for h in ids:
        assert np.all(np.linalg.eigvalsh(comp.covariances[h]) > 0)
    if not marginal:
        assert np.all(comp.jumps > 0)
    assert state.u >= 0 and math.isfinite(state.u)
