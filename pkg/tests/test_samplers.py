import numpy as np
import pytest
from scipy import integrate, stats

from conftest import cosine_kernel
from pdppmix import _sweeps as sw
from pdppmix import geweke
from pdppmix.errors import ConfigError
from pdppmix.kernel import Domain, FourierProjectionKernel, make_palm
from pdppmix.mixture import ComponentSet, Dataset, Hyperparameters, MixtureState, check_state
from pdppmix.samplers import (
    SamplerKind,
    atom_log_acceptance,
    conditional_sweep,
    initialize,
    marginal_b_sweep,
    new_pair_weight,
    reshuffle,
    run_chain,
    simulate_prior,
)
from pdppmix.summaries import effective_sample_size


def _logdet_oracle(points, lower, upper, ell):
    G = np.array([[cosine_kernel(a, b, lower, upper, ell) for b in points] for a in points])
    sign, val = np.linalg.slogdet(G)
    return val if sign > 0 else -np.inf


# ---------------------------------------------------------------------------
# Atom moves
# ---------------------------------------------------------------------------


@pytest.fixture
def toy():
    """d = 1, ell = 3 (m = 7): two occupied atoms and five free ones."""
    dom = Domain([-3.0], [3.0])
    kern = FourierProjectionKernel(dom, 3)
    atoms = np.array([[-1.2], [1.4], [-2.5], [-0.3], [0.5], [2.2], [2.8]])
    data = np.array([[-1.0], [-0.7], [-1.5]])
    cov = np.array([[0.4]])
    return kern, atoms, data, cov


@pytest.mark.parametrize("hastings", [False, True])
def test_hand_computed_acceptance_ratio(toy, hastings):
    kern, atoms, data, cov = toy
    hyper = Hyperparameters(omega=[[1.0]], proposal_local_weight=0.9, proposal_local_var=0.01,
                            hastings_correction=hastings)
    cand = np.array([-0.9])
    got = atom_log_acceptance(atoms, 0, cand, data, cov, hyper, kern)

    sd = np.sqrt(cov[0, 0])
    new = atoms.copy()
    new[0] = cand
    ref = (stats.norm(cand[0], sd).logpdf(data).sum() - stats.norm(atoms[0, 0], sd).logpdf(data).sum()
           + _logdet_oracle(new[:, 0], -3, 3, 3) - _logdet_oracle(atoms[:, 0], -3, 3, 3))
    if hastings:
        others = _logdet_oracle(atoms[1:, 0], -3, 3, 3)
        palm_cand = np.exp(_logdet_oracle(new[:, 0], -3, 3, 3) - others)
        palm_cur = np.exp(_logdet_oracle(atoms[:, 0], -3, 3, 3) - others)
        g = 0.9 * stats.norm(0, 0.1).pdf(cand[0] - atoms[0, 0])
        ref += np.log(g + 0.1 * palm_cur) - np.log(g + 0.1 * palm_cand)
    assert got == pytest.approx(ref, abs=1e-10)


def test_candidate_equal_to_current_is_accepted(toy):
    kern, atoms, data, cov = toy
    hyper = Hyperparameters(omega=[[1.0]])
    assert atom_log_acceptance(atoms, 1, atoms[1], data, cov, hyper, kern) == pytest.approx(0.0, abs=1e-12)


def test_candidate_on_another_atom_or_outside_is_rejected(toy):
    kern, atoms, data, cov = toy
    hyper = Hyperparameters(omega=[[1.0]])
    assert atom_log_acceptance(atoms, 0, atoms[3], data, cov, hyper, kern) == -np.inf
    assert atom_log_acceptance(atoms, 0, [3.5], data, cov, hyper, kern) == -np.inf


def test_mixture_proposal_is_not_symmetric(toy):
    # forward and reverse densities of the local/Palm mixture differ whenever the
    # Palm intensities at the two points differ, so a Hastings term is required
    kern, atoms, _, _ = toy
    palm = make_palm(kern, atoms[1:])
    x, y = atoms[0], np.array([-0.9])
    g = 0.9 * stats.norm(0, 0.1).pdf(y[0] - x[0])
    fwd = g + 0.1 * palm.diag(y[None])[0]
    rev = g + 0.1 * palm.diag(x[None])[0]
    assert abs(np.log(fwd / rev)) > 1e-3


@pytest.mark.parametrize("hastings", [True])
def test_atom_kernel_leaves_target_invariant(hastings):
    # one moving atom, two fixed ones; target ~ likelihood x K^!(x, x)
    kern = FourierProjectionKernel(Domain([0.0], [1.0]), 1)
    lower, width, ell, inv_vol = kern.params
    fixed = np.array([[0.2], [0.62]])
    Yh = np.array([[0.45], [0.5], [0.42]])
    var = 0.08
    Lc = np.array([[np.sqrt(var)]])
    hl = float(np.log(Lc[0, 0]))
    palm = make_palm(kern, fixed)
    grid = np.linspace(0, 1, 4001)
    dens = palm.diag(grid[:, None]) * np.exp(stats.norm(grid[:, None], np.sqrt(var)).logpdf(Yh.T).sum(axis=1))
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0)
    cdf /= cdf[-1]
    rng = np.random.default_rng(7)
    atoms = np.vstack([[[0.9]], fixed])
    xs = np.empty(100_000)
    for t in range(len(xs)):
        sw.mh_atom_move(atoms, 0, Yh, Lc, hl, lower, width, ell, inv_vol, kern.m, 0.5, 0.01, hastings, rng, 10**6)
        xs[t] = atoms[0, 0]
    xs = xs[1000:]
    for p in np.linspace(0.1, 0.9, 9):
        t = np.interp(p, cdf, grid)
        ind = (xs <= t).astype(float)
        se = np.sqrt(p * (1 - p) / effective_sample_size(ind).value)
        assert abs(ind.mean() - p) < 3.5 * se, (p, ind.mean(), se)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def test_single_observation_conditional_sweep(rng):
    kern = FourierProjectionKernel(Domain([-2.0], [2.0]), 1)
    hyper = Hyperparameters(omega=[[1.0]], ell=1)
    ds = Dataset([[0.3]])
    state = initialize(ds, hyper, kern, rng)
    for _ in range(20):
        conditional_sweep(state, ds, hyper, kern, rng)
        assert state.k == 1
        check_state(state, kern.domain)
        h = state.allocations[0]
        others = np.delete(state.components.locations, h, axis=0)
        palm = make_palm(kern, state.components.locations[[h]])
        assert np.all(palm.diag(others) > 1e-8)


def test_sweeps_preserve_invariants(rng):
    data = Dataset(np.concatenate([rng.normal(-3, 0.5, 15), rng.normal(2, 0.5, 15)]))
    hyper = Hyperparameters.default_for(1, ell=2)
    for kind in ("conditional", "marginal_a", "marginal_b"):
        tr = run_chain(SamplerKind(kind, mc_integral_points=256), data, hyper, 40, 0, 3, debug=True)
        assert np.all((tr.allocations >= 1) & (tr.allocations <= 5))
        for r in tr.reports:
            assert 0 <= r.accepted_atom_moves <= r.proposed_atom_moves
            assert 1 <= r.k <= 5


def test_run_chain_is_reproducible():
    data = Dataset(np.random.default_rng(0).normal(size=(25, 2)))
    hyper = Hyperparameters.default_for(2)
    for kind in ("conditional", "marginal_b"):
        a = run_chain(kind, data, hyper, 30, 10, 42)
        b = run_chain(kind, data, hyper, 30, 10, 42)
        assert np.array_equal(a.allocations, b.allocations)
        assert a.reports == b.reports
        c = run_chain(kind, data, hyper, 30, 10, 43)
        assert not np.array_equal(a.allocations, c.allocations) or a.reports != c.reports


def test_run_chain_validates_arguments():
    data = Dataset([[0.0], [1.0]])
    hyper = Hyperparameters.default_for(1)
    with pytest.raises(ConfigError):
        run_chain("conditional", data, hyper, 10, 10, 0)
    with pytest.raises(ConfigError):
        run_chain("gibbs", data, hyper, 10, 0, 0)
    with pytest.raises(ConfigError):
        run_chain("conditional", data, Hyperparameters.default_for(2), 10, 0, 0)


def test_marginal_sweep_does_not_depend_on_u():
    data = Dataset(np.random.default_rng(1).normal(size=40))
    hyper = Hyperparameters.default_for(1, ell=2)
    kern = FourierProjectionKernel(Domain([-4.0], [4.0]), 2)
    state = initialize(data, hyper, kern, np.random.default_rng(2))
    a, b = state.copy(), state.copy()
    b.u = 1e3
    marginal_b_sweep(a, data, hyper, kern, np.random.default_rng(3))
    marginal_b_sweep(b, data, hyper, kern, np.random.default_rng(3))
    assert np.array_equal(a.allocations, b.allocations)
    assert np.array_equal(a.components.locations, b.components.locations)


def test_thinning_and_snapshots():
    data = Dataset(np.random.default_rng(1).normal(size=20))
    tr = run_chain("marginal_b", data, Hyperparameters.default_for(1), 50, 10, 1, thin=4, snapshot_every=2)
    assert len(tr) == 10
    assert len(tr.atoms_snapshot) == 5
    loc, cov, w = tr.atoms_snapshot[0]
    assert loc.shape == (11, 1) and cov.shape == (11, 1, 1)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(tr.domain.contains(loc))


# ---------------------------------------------------------------------------
# Marginal reallocation pieces
# ---------------------------------------------------------------------------


def test_new_pair_weight_vanishes_when_all_atoms_occupied(unit_kernel, rng):
    hyper = Hyperparameters(omega=[[1.0]], ell=1)
    occupied = np.array([[-1 / 3], [0.0], [1 / 3]])
    assert new_pair_weight([0.1], occupied, hyper, unit_kernel, unit_kernel.domain.uniform(rng, 512)) == 0.0


def test_new_pair_weight_matches_quadrature(rng):
    kern = FourierProjectionKernel(Domain([-2.0], [3.0]), 2)
    hyper = Hyperparameters(a_s=0.3, ell=2, tau=3.0, omega=[[2.0]])
    occupied = np.array([[0.4]])
    y = 0.9
    palm = make_palm(kern, occupied)
    # t density with 1 + tau - d degrees of freedom is the prior-marginal of N(y | theta, Delta)
    nu = 1 + hyper.tau - 1
    tden = stats.t(df=nu, scale=np.sqrt(2.0 / nu))
    grid = np.linspace(-2, 3, 10**6)
    ref = 0.3 * integrate.trapezoid(palm.diag(grid[:, None]) * tden.pdf(y - grid), grid)
    vals = np.array([new_pair_weight([y], occupied, hyper, kern, kern.domain.uniform(rng, 2048)) for _ in range(200)])
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - ref) < 3 * se
    assert abs(vals[0] - ref) < 3 * vals.std(ddof=1)


def test_likelihood_dominance_keeps_observation(rng):
    # observation sitting on an atom with a tiny covariance stays there
    y = np.array([[-2.0], [-2.0 + 1e-4], [3.0]])
    kern = FourierProjectionKernel(Domain([-5.0], [5.0]), 2)
    hyper = Hyperparameters(omega=[[1.0]], ell=2, tau=2.0)
    lower, width, ell, inv_vol = kern.params
    stay = 0
    trials = 500
    for _ in range(trials):
        comp = ComponentSet(np.array([[-2.0], [3.0], [0.0], [1.0], [-4.0]]),
                            np.array([[[1e-6]], [[1.0]], [[1.0]], [[1.0]], [[1.0]]]), np.ones(5))
        c = np.array([0, 0, 1])
        counts = np.bincount(c, minlength=5)
        sw.neal8_scan(y, c, counts, comp.locations, comp.covariances, comp.chol, comp.half_logdet,
                      0.1, 3, 2.0, np.eye(1), lower, width, ell, inv_vol, rng, 10**6)
        stay += c[0] == c[1] and np.allclose(comp.locations[c[0]], -2.0)
    assert stay / trials > 0.99


def test_neal8_auxiliary_count_does_not_change_posterior():
    data = Dataset(np.random.default_rng(5).standard_t(6, 60) + np.repeat([-4.0, 0.0, 4.0], 20))
    ks = []
    for T in (1, 30):
        hyper = Hyperparameters.default_for(1, neal8_T=T)
        ks.append(run_chain("marginal_b", data, hyper, 3000, 500, 11, snapshot_every=None).k.astype(float))
    se = np.sqrt(sum(k.var() / effective_sample_size(k).value for k in ks))
    assert abs(ks[0].mean() - ks[1].mean()) < 3 * max(se, 1e-3)


def test_reshuffle_flat_likelihood_accepts_in_domain_moves(rng):
    kern = FourierProjectionKernel(Domain([-5.0], [5.0]), 2)
    hyper = Hyperparameters(omega=[[1.0]], ell=2, proposal_local_weight=0.9)
    comp = ComponentSet(np.array([[0.0], [1.0], [2.0], [3.0], [4.0]]), np.tile([[1e6]], (5, 1, 1)), np.ones(5))
    state = MixtureState(comp, np.array([0]), 0.0)
    # keep the covariance huge: only the location move matters here
    acc = 0
    for _ in range(2000):
        comp.set_covariance(0, np.array([[1e6]]))
        a, p = reshuffle(state, Dataset([[0.0]]), hyper, kern, rng)
        acc += a
        comp.locations[0] = 0.0
    assert acc / 2000 > 0.95


def test_covariance_update_preserves_conjugate_pair(rng):
    # alternate y | Delta and Delta | y: the Delta marginal must stay InvGa(1, 3)
    hyper = Hyperparameters.default_for(1)
    kern = FourierProjectionKernel(Domain([-10.0], [10.0]), 1)
    comp = ComponentSet(np.array([[0.0], [5.0], [-5.0]]), np.tile([[3.0]], (3, 1, 1)), np.ones(3))
    state = MixtureState(comp, np.array([0, 0]), 0.0)
    draws = []
    from pdppmix.samplers import _posterior_covariances
    for t in range(6000):
        y = rng.normal(0.0, np.sqrt(comp.covariances[0, 0, 0]), (2, 1))
        _posterior_covariances(state, Dataset(y), hyper, rng, [0])
        draws.append(comp.covariances[0, 0, 0])
    draws = np.array(draws[::3])
    assert stats.kstest(draws, stats.invgamma(1.0, scale=3.0).cdf).pvalue > 1e-3


def test_simulate_prior_shapes(rng):
    kern = FourierProjectionKernel(Domain([-1.0, -1.0], [1.0, 1.0]), 1)
    hyper = Hyperparameters.default_for(2)
    state, data = simulate_prior(7, hyper, kern, rng)
    assert data.y.shape == (7, 2)
    check_state(state, kern.domain)


# ---------------------------------------------------------------------------
# Joint-distribution tests (short versions; the full ones run in the acceptance suite)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["marginal_a"])
def test_geweke_marginal_a(kind):
    hyper = Hyperparameters(a_s=0.5, ell=1, tau=4.0, omega=[[1.0]])
    kern = FourierProjectionKernel(Domain([-2.0], [2.0]), 1)
    rng = np.random.default_rng(99)
    fwd = geweke.forward_draws(5, hyper, kern, 8000, rng)
    suc = geweke.successive_draws(SamplerKind(kind, mc_integral_points=512), 5, hyper, kern, 8000, rng)
    worst = max(abs(c.z) for c in geweke.compare(fwd, suc, m=3))
    assert worst < 3.5


def test_geweke_two_dimensional():
    hyper = Hyperparameters(a_s=0.5, ell=1, tau=5.0, omega=[[1.0, 0.3], [0.3, 0.8]])
    kern = FourierProjectionKernel(Domain([-2.0, -1.0], [2.0, 1.5]), 1)
    rng = np.random.default_rng(3)
    fwd = geweke.forward_draws(5, hyper, kern, 8000, rng)
    for kind in ("conditional", "marginal_b"):
        suc = geweke.successive_draws(kind, 5, hyper, kern, 8000, rng)
        worst = max(abs(c.z) for c in geweke.compare(fwd, suc, m=9))
        assert worst < 3.5, kind
