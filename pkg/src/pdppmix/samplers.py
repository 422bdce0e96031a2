"""MCMC samplers for the projection-DPP mixture.

Three transition kernels share one state representation:

``conditional``
    Gibbs sampler over the full mixing measure (jumps, all ``m`` atoms and
    covariances) with an auxiliary ``u``; occupied atoms move by
    Metropolis-Hastings.
``marginal_a``
    Collapsed sampler that reallocates each observation using the predictive
    distribution, with the new-pair integral estimated by Monte Carlo.
``marginal_b``
    Collapsed sampler with ``T`` auxiliary pairs per observation.

Both marginal sweeps end with a reshuffling step that moves each occupied
atom under the joint density (Gram determinant times likelihood) and redraws
each occupied covariance from its conjugate posterior.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _numeric as nm
from . import _sweeps as sw
from .dpp import DEFAULT_REJECTION_CAP, _raise_for
from .errors import ConfigError, NumericalError
from .jumps import GammaJumpModel, sample_u_conditional
from .kernel import Domain, FourierProjectionKernel
from .mixture import (
    ComponentSet,
    Dataset,
    Hyperparameters,
    MixtureState,
    build_domain,
    check_state,
    posterior_cov_params,
    sample_inverse_wishart,
    _chol,
)
from .summaries import ChainTrace, partition_entropy

KINDS = ("conditional", "marginal_a", "marginal_b")


@dataclass(frozen=True)
class SamplerKind:
    """Which transition kernel to run.

    ``mc_integral_points`` is only used by ``marginal_a``; the number of
    auxiliaries of ``marginal_b`` is ``Hyperparameters.neal8_T``.
    """

    name: str
    mc_integral_points: int = 2048

    def __post_init__(self):
        if self.name not in KINDS:
            raise ConfigError(f"unknown sampler {self.name!r}; choose one of {', '.join(KINDS)}")
        if int(self.mc_integral_points) != self.mc_integral_points or self.mc_integral_points < 1:
            raise ConfigError(f"mc_integral_points must be a positive integer, got {self.mc_integral_points}")

    @property
    def marginal(self) -> bool:
        return self.name != "conditional"


@dataclass(frozen=True)
class SweepReport:
    k: int
    entropy: float
    u: float
    accepted_atom_moves: int
    proposed_atom_moves: int
    log_likelihood: float


def _raise_status(status: int, what: str):
    if status == nm.SINGULAR:
        raise NumericalError(f"{what}: singular Gram matrix or vanishing new-pair integral")
    if status == nm.CAP_EXCEEDED:
        raise NumericalError(f"{what}: rejection sampler exceeded {DEFAULT_REJECTION_CAP} proposals")


def _report(state: MixtureState, dataset: Dataset, acc: int, prop: int) -> SweepReport:
    return SweepReport(
        k=state.k,
        entropy=partition_entropy(state.allocations),
        u=float(state.u),
        accepted_atom_moves=int(acc),
        proposed_atom_moves=int(prop),
        log_likelihood=state.log_likelihood(dataset),
    )


def _check_kernel(state: MixtureState, hyper: Hyperparameters, kernel: FourierProjectionKernel):
    if state.m != kernel.m:
        raise ValueError(f"state has {state.m} components but the kernel has rank {kernel.m}")
    if kernel.d != hyper.d:
        raise ValueError(f"kernel dimension {kernel.d} differs from the covariance prior dimension {hyper.d}")


def _posterior_covariances(state, dataset, hyper, rng, labels):
    comp = state.components
    for h in labels:
        tau_n, omega_n = posterior_cov_params(
            dataset.y[state.allocations == h], comp.locations[h], hyper.tau, hyper.omega
        )
        comp.set_covariance(h, sample_inverse_wishart(tau_n, omega_n, rng))


def _prior_covariances(hyper, rng, count):
    return [sample_inverse_wishart(hyper.tau, hyper.omega, rng) for _ in range(count)]


# ---------------------------------------------------------------------------
# Atom moves
# ---------------------------------------------------------------------------


def _move_atoms(atoms, order, state, dataset, hyper, kernel, rng):
    """MH-move ``atoms[j]`` for each ``(j, h)`` in ``order``; returns acceptances."""
    lower, width, ell, inv_vol = kernel.params
    comp = state.components
    accepted = 0
    for j, h in order:
        Yh = np.ascontiguousarray(dataset.y[state.allocations == h])
        ok, status = sw.mh_atom_move(
            atoms, j, Yh, comp.chol[h], comp.half_logdet[h], lower, width, ell, inv_vol,
            kernel.m, hyper.proposal_local_weight, hyper.proposal_local_var,
            hyper.hastings_correction, rng, DEFAULT_REJECTION_CAP,
        )
        _raise_status(status, "atom move")
        accepted += bool(ok)
    return accepted


def mh_update_atoms(state: MixtureState, dataset: Dataset, hyper: Hyperparameters,
                    kernel: FourierProjectionKernel, rng) -> tuple[int, int]:
    """Move every occupied atom, conditioning on the other ``m - 1`` atoms.

    Returns ``(accepted, proposed)``.
    """
    active = state.active_ids()
    if len(active) == 0:
        raise ValueError("no occupied atoms to update")
    atoms = state.components.locations
    acc = _move_atoms(atoms, [(h, h) for h in active], state, dataset, hyper, kernel, rng)
    return acc, len(active)


def atom_log_acceptance(atoms, h, candidate, cluster_data, cov, hyper: Hyperparameters,
                        kernel: FourierProjectionKernel) -> float:
    """Log acceptance ratio for moving ``atoms[h]`` to ``candidate``.

    The other rows of ``atoms`` are held fixed; ``cov`` is the covariance of
    component ``h`` and ``cluster_data`` its observations.  Returns ``-inf``
    for candidates outside the domain or coincident with another atom.
    """
    atoms = np.ascontiguousarray(atoms, dtype=float)
    d = atoms.shape[1]
    lower, width, ell, inv_vol = kernel.params
    X = np.ascontiguousarray(np.delete(atoms, h, axis=0))
    q = len(X)
    L = np.zeros((max(q, 1), max(q, 1)))
    if nm.gram_cholesky(X, width, ell, inv_vol, L) < q:
        raise NumericalError("the fixed atoms have a singular Gram matrix")
    Lc = _chol(cov)
    Yh = np.ascontiguousarray(np.asarray(cluster_data, dtype=float).reshape(-1, d))
    return float(sw.atom_log_ratio(
        np.asarray(candidate, dtype=float).reshape(d), atoms[h].copy(), X if q else np.zeros((1, d)),
        q, L, Yh, Lc, nm.half_logdet_chol(Lc), lower, width, ell, inv_vol, kernel.m,
        kernel.m - q, hyper.proposal_local_weight, hyper.proposal_local_var, hyper.hastings_correction,
    ))


def reshuffle(state: MixtureState, dataset: Dataset, hyper: Hyperparameters,
              kernel: FourierProjectionKernel, rng) -> tuple[int, int]:
    """Move each occupied atom, then redraw each occupied covariance.

    The location target is ``det K[theta*] x likelihood``; the Palm part of
    the proposal is reduced at the other ``k - 1`` occupied atoms.
    Returns ``(accepted, proposed)``.
    """
    active = state.active_ids()
    if len(active) == 0:
        raise ValueError("reshuffle needs at least one occupied atom")
    comp = state.components
    atoms = np.ascontiguousarray(comp.locations[active])
    acc = _move_atoms(atoms, list(enumerate(active)), state, dataset, hyper, kernel, rng)
    comp.locations[active] = atoms
    _posterior_covariances(state, dataset, hyper, rng, active)
    return acc, len(active)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _sample_allocations(logw, rng) -> np.ndarray:
    logw = logw - logw.max(axis=1, keepdims=True)
    p = np.exp(logw)
    cum = np.cumsum(p, axis=1)
    target = rng.random(len(p)) * cum[:, -1]
    c = (cum <= target[:, None]).sum(axis=1)
    return np.minimum(c, p.shape[1] - 1).astype(np.int64)


def conditional_sweep(state: MixtureState, dataset: Dataset, hyper: Hyperparameters,
                      kernel: FourierProjectionKernel, rng) -> SweepReport:
    """One sweep of the conditional sampler; updates ``state`` in place."""
    _check_kernel(state, hyper, kernel)
    comp = state.components
    jm = GammaJumpModel(hyper.a_s)
    m = kernel.m
    # (1) auxiliary variable
    state.u = sample_u_conditional(dataset.n, float(comp.jumps.sum()), rng)
    # (2) allocations
    logw = sw.allocation_logweights(dataset.y, comp.locations, comp.chol, comp.half_logdet, np.log(comp.jumps))
    state.allocations = _sample_allocations(logw, rng)
    counts = state.counts()
    active = np.flatnonzero(counts > 0)
    empty = np.flatnonzero(counts == 0)
    # (3) non-active part: jumps, Palm locations, prior covariances
    comp.jumps[empty] = jm.sample_tilted_jump(state.u, rng, size=len(empty))
    if len(empty):
        lower, width, ell, inv_vol = kernel.params
        pts, _, status = nm.sample_palm_points(
            np.ascontiguousarray(comp.locations[active]), len(empty), lower, width, ell,
            inv_vol, m, rng, DEFAULT_REJECTION_CAP,
        )
        _raise_for(status, len(pts), len(empty), DEFAULT_REJECTION_CAP)
        comp.locations[empty] = pts
        for h, cov in zip(empty, _prior_covariances(hyper, rng, len(empty))):
            comp.set_covariance(h, cov)
    # (4a) active jumps
    comp.jumps[active] = jm.sample_active_jump(counts[active], state.u, rng)
    # (4b) active locations
    acc, prop = mh_update_atoms(state, dataset, hyper, kernel, rng)
    # (5) active covariances
    _posterior_covariances(state, dataset, hyper, rng, active)
    return _report(state, dataset, acc, prop)


def _marginal_arrays(state, hyper, kernel):
    comp = state.components
    lower, width, ell, inv_vol = kernel.params
    return comp, lower, width, ell, inv_vol, _chol(hyper.omega)


def new_pair_weight(y, occupied, hyper: Hyperparameters, kernel: FourierProjectionKernel,
                    mc_points) -> float:
    """Monte Carlo new-pair weight ``a_s * integral K^!(t, t) t(y | t) dt``.

    ``K^!`` is reduced at the ``occupied`` atoms, ``t(y | .)`` is the density of
    ``N(y | theta, Delta)`` with ``Delta`` integrated over its prior, and
    ``mc_points`` are uniform draws on the domain.  Zero when all ``m`` atoms
    are occupied.
    """
    d = kernel.d
    lower, width, ell, inv_vol = kernel.params
    X = np.ascontiguousarray(np.asarray(occupied, dtype=float).reshape(-1, d))
    q = len(X)
    if q > kernel.m:
        raise ValueError(f"at most m = {kernel.m} occupied atoms, got {q}")
    L = np.zeros((max(q, 1), max(q, 1)))
    if nm.gram_cholesky(X, width, ell, inv_vol, L) < q:
        raise NumericalError("occupied atoms have a singular Gram matrix")
    Xs = X if q else np.zeros((1, d))
    Z = np.ascontiguousarray(mc_points, dtype=float).reshape(-1, d)
    P = nm.palm_diagonal(Z, Xs, q, L, width, ell, inv_vol)
    omega_chol = _chol(hyper.omega)
    tau = float(hyper.tau)
    log_tconst = (math.lgamma(0.5 * (1 + tau)) - math.lgamma(0.5 * (1 + tau - d))
                  - 0.5 * d * math.log(math.pi) - nm.half_logdet_chol(omega_chol))
    integral = sw._mc_integral(np.asarray(y, dtype=float).reshape(d), Z, P, q, kernel.m,
                               1.0 / inv_vol, log_tconst, 0.5 * (1 + tau), omega_chol)
    return hyper.a_s * float(integral)


def marginal_a_sweep(state: MixtureState, dataset: Dataset, hyper: Hyperparameters,
                     kernel: FourierProjectionKernel, rng, *, mc_integral_points: int = 2048) -> SweepReport:
    """One sweep of the Monte Carlo-integral marginal sampler, then reshuffle."""
    _check_kernel(state, hyper, kernel)
    state.u = GammaJumpModel(hyper.a_s).sample_u_marginal(dataset.n, kernel.m, rng)
    comp, lower, width, ell, inv_vol, omega_chol = _marginal_arrays(state, hyper, kernel)
    Z = kernel.domain.uniform(rng, mc_integral_points)
    counts = state.counts()
    status = sw.neal2_scan(
        dataset.y, state.allocations, counts, comp.locations, comp.covariances, comp.chol,
        comp.half_logdet, hyper.a_s, float(hyper.tau), np.ascontiguousarray(hyper.omega), omega_chol, Z, lower, width, ell,
        inv_vol, rng, DEFAULT_REJECTION_CAP,
    )
    _raise_status(status, "marginal_a reallocation")
    acc, prop = reshuffle(state, dataset, hyper, kernel, rng)
    return _report(state, dataset, acc, prop)


def marginal_b_sweep(state: MixtureState, dataset: Dataset, hyper: Hyperparameters,
                     kernel: FourierProjectionKernel, rng) -> SweepReport:
    """One sweep of the auxiliary-pair marginal sampler, then reshuffle."""
    _check_kernel(state, hyper, kernel)
    state.u = GammaJumpModel(hyper.a_s).sample_u_marginal(dataset.n, kernel.m, rng)
    comp, lower, width, ell, inv_vol, omega_chol = _marginal_arrays(state, hyper, kernel)
    counts = state.counts()
    status = sw.neal8_scan(
        dataset.y, state.allocations, counts, comp.locations, comp.covariances, comp.chol,
        comp.half_logdet, hyper.a_s, hyper.neal8_T, float(hyper.tau), omega_chol, lower,
        width, ell, inv_vol, rng, DEFAULT_REJECTION_CAP,
    )
    _raise_status(status, "marginal_b reallocation")
    acc, prop = reshuffle(state, dataset, hyper, kernel, rng)
    return _report(state, dataset, acc, prop)


def sweep(kind: SamplerKind, state, dataset, hyper, kernel, rng) -> SweepReport:
    if kind.name == "conditional":
        return conditional_sweep(state, dataset, hyper, kernel, rng)
    if kind.name == "marginal_a":
        return marginal_a_sweep(state, dataset, hyper, kernel, rng, mc_integral_points=kind.mc_integral_points)
    return marginal_b_sweep(state, dataset, hyper, kernel, rng)


# ---------------------------------------------------------------------------
# Prior simulation, initialisation and measure completion
# ---------------------------------------------------------------------------


def _draw_locations(kernel, cond, count, rng):
    lower, width, ell, inv_vol = kernel.params
    pts, _, status = nm.sample_palm_points(
        np.ascontiguousarray(cond, dtype=float).reshape(-1, kernel.d), count, lower, width,
        ell, inv_vol, kernel.m, rng, DEFAULT_REJECTION_CAP,
    )
    _raise_for(status, len(pts), count, DEFAULT_REJECTION_CAP)
    return pts


def sample_prior_components(hyper: Hyperparameters, kernel: FourierProjectionKernel, rng) -> ComponentSet:
    """Mixing measure from the prior: DPP atoms, ``Ga(a_s, 1)`` jumps, InvWi covariances."""
    locations = _draw_locations(kernel, np.zeros((0, kernel.d)), kernel.m, rng)
    jumps = rng.gamma(hyper.a_s, 1.0, size=kernel.m)
    # guard against jumps that underflow to zero for tiny a_s
    jumps = np.maximum(jumps, np.finfo(float).tiny)
    covs = np.array(_prior_covariances(hyper, rng, kernel.m))
    return ComponentSet(locations, covs, jumps)


def initialize(dataset: Dataset, hyper: Hyperparameters, kernel: FourierProjectionKernel, rng) -> MixtureState:
    """Prior draw of the mixing measure, observations to the nearest atom.

    Distance is Mahalanobis under each atom's own covariance.
    """
    _check_dims(dataset, hyper, kernel)
    comp = sample_prior_components(hyper, kernel, rng)
    dist = np.empty((dataset.n, kernel.m))
    for h in range(kernel.m):
        from scipy.linalg import solve_triangular

        Z = solve_triangular(comp.chol[h], (dataset.y - comp.locations[h]).T, lower=True)
        dist[:, h] = np.sum(Z * Z, axis=0)
    c = np.argmin(dist, axis=1).astype(np.int64)
    return MixtureState(comp, c, 1.0)


def simulate_prior(n: int, hyper: Hyperparameters, kernel: FourierProjectionKernel, rng):
    """Forward simulation of ``(state, data)`` from the prior model.

    The mixing measure is drawn from the prior, allocations from its
    normalised weights and each observation from its component's Gaussian.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    comp = sample_prior_components(hyper, kernel, rng)
    w = comp.jumps / comp.jumps.sum()
    c = rng.choice(kernel.m, size=n, p=w).astype(np.int64)
    y = simulate_data(comp, c, rng)
    return MixtureState(comp, c, 1.0), Dataset(y)


def simulate_data(comp: ComponentSet, allocations, rng) -> np.ndarray:
    """``y_i ~ N(loc_{c_i}, Sigma_{c_i})``."""
    c = np.asarray(allocations)
    z = rng.standard_normal((len(c), comp.d))
    return comp.locations[c] + np.einsum("nij,nj->ni", comp.chol[c], z)


def complete_measure(state: MixtureState, hyper: Hyperparameters, kernel: FourierProjectionKernel,
                     rng) -> ComponentSet:
    """Draw the full mixing measure given the occupied pairs of a marginal state.

    Occupied jumps are ``Ga(n_h + a_s, 1 + u)``; the free atoms are a Palm
    DPP draw at the occupied ones with ``Ga(a_s, 1 + u)`` jumps and prior
    covariances.
    """
    comp = state.components
    counts = state.counts()
    active = np.flatnonzero(counts > 0)
    jm = GammaJumpModel(hyper.a_s)
    loc = comp.locations.copy()
    covs = comp.covariances.copy()
    jumps = np.empty(kernel.m)
    jumps[active] = jm.sample_active_jump(counts[active], state.u, rng)
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        loc[empty] = _draw_locations(kernel, loc[active], len(empty), rng)
        jumps[empty] = np.maximum(jm.sample_tilted_jump(state.u, rng, size=len(empty)), np.finfo(float).tiny)
        covs[empty] = _prior_covariances(hyper, rng, len(empty))
    return ComponentSet(loc, covs, jumps)


def _check_dims(dataset, hyper, kernel):
    if dataset.d != kernel.d or dataset.d != hyper.d:
        raise ConfigError(
            f"dimension mismatch: data d={dataset.d}, kernel d={kernel.d}, covariance prior d={hyper.d}"
        )


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------


def make_kernel(dataset: Dataset, hyper: Hyperparameters, domain: Domain | None = None) -> FourierProjectionKernel:
    if domain is None:
        domain = build_domain(dataset, hyper.domain_expansion)
    return FourierProjectionKernel(domain, hyper.ell)


def run_chain(kind: SamplerKind | str, dataset: Dataset, hyper: Hyperparameters, iterations: int,
              burn_in: int, seed, *, thin: int = 1, snapshot_every: int | None = 10,
              domain: Domain | None = None, debug: bool = False) -> ChainTrace:
    """Run one chain and record every ``thin``-th post-burn-in iteration.

    ``seed`` is anything accepted by ``numpy.random.default_rng`` (an int or
    a ``SeedSequence``).  Mixing-measure snapshots for density estimation are
    kept every ``snapshot_every`` recorded iterations (``None`` disables
    them); marginal samplers complete the measure with a separate random
    stream so snapshots do not perturb the chain.
    """
    if isinstance(kind, str):
        kind = SamplerKind(kind)
    if not (iterations > burn_in >= 0):
        raise ConfigError(f"need iterations > burn_in >= 0, got iterations={iterations}, burn_in={burn_in}")
    if thin < 1:
        raise ConfigError(f"thin must be at least 1, got {thin}")
    if snapshot_every is not None and snapshot_every < 1:
        raise ConfigError(f"snapshot_every must be at least 1, got {snapshot_every}")
    kernel = make_kernel(dataset, hyper, domain)
    _check_dims(dataset, hyper, kernel)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    chain_ss, snap_ss = ss.spawn(2)
    rng = np.random.default_rng(chain_ss)
    snap_rng = np.random.default_rng(snap_ss)
    state = initialize(dataset, hyper, kernel, rng)
    reports, allocs, snaps = [], [], []
    start = time.perf_counter()
    recorded = 0
    for it in range(iterations):
        rep = sweep(kind, state, dataset, hyper, kernel, rng)
        if debug:
            check_state(state, kernel.domain, marginal=kind.marginal)
        if it < burn_in or (it - burn_in) % thin:
            continue
        reports.append(rep)
        allocs.append(state.allocations + 1)
        if snapshot_every is not None and recorded % snapshot_every == 0:
            comp = complete_measure(state, hyper, kernel, snap_rng) if kind.marginal else state.components
            snaps.append((comp.locations.copy(), comp.covariances.copy(), comp.jumps / comp.jumps.sum()))
        recorded += 1
    elapsed = time.perf_counter() - start
    return ChainTrace(
        reports=reports,
        allocations=np.array(allocs, dtype=np.int64).reshape(len(allocs), dataset.n),
        atoms_snapshot=snaps or None,
        wall_time_seconds=elapsed,
        m=kernel.m,
        sampler=kind.name,
        domain=kernel.domain,
    )
