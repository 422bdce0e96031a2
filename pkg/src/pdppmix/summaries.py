"""Posterior summaries of a chain: cluster counts, entropy, ESS, co-clustering,
a VI point-estimate partition and the posterior-mean density."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .kernel import Domain
from .mixture import _chol, mvn_logpdf_rows
from . import _numeric as nm


@dataclass
class ChainTrace:
    """Recorded output of one chain.

    ``allocations`` are 1-based labels, one row per recorded iteration.
    ``atoms_snapshot`` holds ``(locations, covariances, normalised weights)``
    triples of the full mixing measure.
    """

    reports: list
    allocations: np.ndarray
    atoms_snapshot: list | None = None
    wall_time_seconds: float = 0.0
    m: int | None = None
    sampler: str = ""
    domain: Domain | None = None

    def __post_init__(self):
        self.allocations = np.asarray(self.allocations, dtype=np.int64)
        if self.allocations.ndim != 2 or len(self.allocations) != len(self.reports):
            raise ValueError("allocations must have one row per report")
        if self.allocations.size and self.allocations.min() < 1:
            raise ValueError("allocation labels are 1-based")
        if self.m is not None and self.allocations.size and self.allocations.max() > self.m:
            raise ValueError(f"allocation labels exceed m = {self.m}")

    def __len__(self):
        return len(self.reports)

    def series(self, name: str) -> np.ndarray:
        """One field of the sweep reports as an array."""
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.reports], dtype=np.int64)

    @property
    def entropy(self) -> np.ndarray:
        return self.series("entropy")

    def acceptance_rate(self) -> np.ndarray:
        acc = self.series("accepted_atom_moves")
        prop = self.series("proposed_atom_moves")
        return np.divide(acc, prop, out=np.zeros_like(acc), where=prop > 0)


class Ess(NamedTuple):
    value: float
    degenerate: bool = False


@dataclass
class PosteriorSummary:
    k_posterior: np.ndarray  # index h-1 holds P(k = h)
    similarity: np.ndarray
    point_partition: np.ndarray
    ess_k: Ess
    ess_entropy: Ess
    density_grid: tuple | None = None
    extra: dict = field(default_factory=dict)

    @property
    def k_mode(self) -> int:
        return int(np.argmax(self.k_posterior)) + 1


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    return x * np.log(np.where(x > 0, x, 1.0))


def partition_entropy(c) -> float:
    """Shannon entropy ``-sum_j p_j log p_j`` of the cluster proportions."""
    c = np.asarray(c)
    if c.size == 0:
        raise ValueError("empty allocation vector")
    _, counts = np.unique(c, return_counts=True)
    p = counts / c.size
    return float(max(0.0, -np.sum(p * np.log(p))))


def autocorrelation(x) -> np.ndarray:
    """Sample autocorrelation at all lags (FFT, biased normalisation)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    f = np.fft.rfft(x, n=2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    if acov[0] <= 0:
        return np.ones(n)
    return acov / acov[0]


def effective_sample_size(series) -> Ess:
    """ESS with Geyer's initial monotone positive sequence estimator.

    ``N / (1 + 2 sum_t rho_t)`` clipped to ``[1, N]``.  A constant series
    gives ``Ess(N, degenerate=True)``.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = len(x)
    if n < 10:
        raise ValueError(f"need at least 10 draws, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0:
        return Ess(float(n), True)
    rho = autocorrelation(x)
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[: stop[0]] if stop.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    return Ess(float(np.clip(n / tau, 1.0, n)), False)


def similarity_matrix(allocations) -> np.ndarray:
    """Fraction of iterations in which each pair of observations shares a cluster."""
    C = np.atleast_2d(np.asarray(allocations))
    if C.shape[0] < 1:
        raise ValueError("need at least one iteration")
    S, n = C.shape
    out = np.zeros((n, n))
    for v in np.unique(C):
        X = (C == v).astype(float)
        out += X.T @ X
    out /= S
    np.fill_diagonal(out, 1.0)
    return out


def _relabel(c) -> np.ndarray:
    """Labels ``0..K-1`` in order of first appearance."""
    _, first, inv = np.unique(c, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv]


def expected_vi(partition, allocations) -> float:
    """Monte Carlo posterior expectation of the variation of information (nats)."""
    a = _relabel(partition)
    C = np.atleast_2d(np.asarray(allocations))
    S, n = C.shape
    B = np.array([_relabel(row) for row in C])
    kb = B.max() + 1
    ka = a.max() + 1
    N = np.zeros((S, ka, kb))
    np.add.at(N, (np.repeat(np.arange(S), n), np.tile(a, S), B.ravel()), 1.0)
    ha = _xlogx(np.bincount(a)).sum()
    hb = _xlogx(N.sum(axis=1)).sum(axis=1)
    hab = _xlogx(N).sum(axis=(1, 2))
    return float(np.mean(ha + hb - 2.0 * hab) / n)


def _greedy_vi(start, B, kmax, rng, sweeps):
    S, n = B.shape
    kb = B.max() + 1
    a = _relabel(start)
    cap = max(kmax, a.max() + 1)
    N = np.zeros((S, cap, kb))
    np.add.at(N, (np.repeat(np.arange(S), n), np.tile(a, S), B.ravel()), 1.0)
    sizes = np.bincount(a, minlength=cap).astype(float)
    rows = np.arange(S)
    for _ in range(sweeps):
        changed = False
        for i in rng.permutation(n):
            a0 = a[i]
            b = B[:, i]
            Nb = N[rows, :, b]  # S x cap: counts in (cluster, b_s)
            occupied = sizes > 0
            cand = occupied.copy()
            cand[a0] = False
            n_occ = occupied.sum() - (sizes[a0] == 1)
            if n_occ < kmax:
                empty = np.flatnonzero(~occupied)
                if empty.size:
                    cand[empty[0]] = True
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                continue
            d_size = (_xlogx(sizes[a0] - 1) - _xlogx(sizes[a0])) + (_xlogx(sizes[idx] + 1) - _xlogx(sizes[idx]))
            n0 = Nb[:, a0]
            rem = _xlogx(n0 - 1) - _xlogx(n0)
            add = _xlogx(Nb[:, idx] + 1) - _xlogx(Nb[:, idx])
            d_joint = rem.mean() + add.mean(axis=0)
            delta = d_size - 2.0 * d_joint
            j = int(np.argmin(delta))
            if delta[j] < -1e-12:
                a1 = idx[j]
                N[rows, a0, b] -= 1
                N[rows, a1, b] += 1
                sizes[a0] -= 1
                sizes[a1] += 1
                a[i] = a1
                changed = True
        if not changed:
            break
    return a


def point_estimate_vi(allocations, sweeps: int = 10, *, restarts: int = 5, seed=0) -> np.ndarray:
    """Greedy search for the partition minimising the posterior expected VI.

    Starts from the single-cluster partition and from ``restarts`` partitions
    drawn from the trace; each start is improved by item-by-item moves in
    random order for up to ``sweeps`` passes.  The best result is returned
    with contiguous 1-based labels.  No more blocks than the largest number
    of clusters seen in the trace are ever used.
    """
    C = np.atleast_2d(np.asarray(allocations))
    if C.shape[0] < 1:
        raise ValueError("need at least one iteration")
    rng = np.random.default_rng(seed)
    B = np.array([_relabel(row) for row in C])
    kmax = int(max(len(np.unique(row)) for row in B))
    picks = rng.choice(len(B), size=min(restarts, len(B)), replace=False)
    starts = [np.zeros(B.shape[1], dtype=np.int64)] + [B[p] for p in picks]
    best, best_loss = None, np.inf
    for s in starts:
        a = _greedy_vi(s, B, kmax, rng, sweeps)
        loss = expected_vi(a, B)
        if loss < best_loss - 1e-12:
            best, best_loss = a, loss
    return _relabel(best) + 1


def variation_of_information(a, b) -> float:
    """VI distance (nats) between two partitions of the same items."""
    return expected_vi(a, np.atleast_2d(b))


def make_grid(domain: Domain, points: int = 1001):
    """Regular grid over the domain: ``points`` nodes per axis (d = 1 or 2)."""
    if domain.d == 1:
        return np.linspace(domain.lower[0], domain.upper[0], points)[:, None]
    if domain.d == 2:
        gx = np.linspace(domain.lower[0], domain.upper[0], points)
        gy = np.linspace(domain.lower[1], domain.upper[1], points)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])
    raise ValueError("grids are only built for d = 1 or 2")


def mixture_density(grid, locations, covariances, weights) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(len(grid))
    for h in range(len(weights)):
        if weights[h] <= 0:
            continue
        L = _chol(covariances[h])
        out += weights[h] * np.exp(mvn_logpdf_rows(grid, locations[h], L, nm.half_logdet_chol(L)))
    return out


def density_estimate(atoms_snapshots, grid, domain: Domain | None = None) -> np.ndarray:
    """Average over snapshots of ``sum_h w_h N(x | loc_h, Sigma_h)`` at each grid point."""
    if not atoms_snapshots:
        raise ValueError("no snapshots to average")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if domain is not None:
        lo, hi = grid.min(axis=0), grid.max(axis=0)
        if np.any(lo > domain.lower + 1e-9 * domain.width) or np.any(hi < domain.upper - 1e-9 * domain.width):
            warnings.warn("density grid does not cover the parameter domain", stacklevel=2)
    total = np.zeros(len(grid))
    for loc, cov, w in atoms_snapshots:
        total += mixture_density(grid, loc, cov, w)
    return total / len(atoms_snapshots)


def k_posterior(trace: ChainTrace) -> np.ndarray:
    m = trace.m if trace.m is not None else int(trace.k.max())
    return np.bincount(trace.k, minlength=m + 1)[1:] / len(trace)


def summarize(trace: ChainTrace, *, grid=None, vi_sweeps: int = 10, seed=0) -> PosteriorSummary:
    if len(trace) < 1:
        raise ValueError("empty trace")
    dens = None
    if grid is not None and trace.atoms_snapshot:
        dens = (np.asarray(grid), density_estimate(trace.atoms_snapshot, grid, trace.domain))
    ess = effective_sample_size if len(trace) >= 10 else (lambda s: Ess(float(len(s)), True))
    return PosteriorSummary(
        k_posterior=k_posterior(trace),
        similarity=similarity_matrix(trace.allocations),
        point_partition=point_estimate_vi(trace.allocations, vi_sweeps, seed=seed),
        ess_k=ess(trace.k),
        ess_entropy=ess(trace.entropy),
        density_grid=dens,
    )
