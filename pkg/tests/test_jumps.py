import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gamma

from pdppmix.jumps import GammaJumpModel, sample_u_conditional, sample_u_marginal


@pytest.mark.parametrize("a_s", [0.1, 1.0, 3.5])
@pytest.mark.parametrize("u", [0.0, 0.3, 2.0, 25.0])
def test_psi_is_laplace_transform(a_s, u):
    jm = GammaJumpModel(a_s)
    # s = t^(1 / a_s) removes the integrable singularity of the gamma density at 0
    ref, _ = integrate.quad(lambda t: np.exp(-(1 + u) * t ** (1 / a_s)), 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    ref /= a_s * gamma(a_s)
    assert jm.psi(u) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("n", [1, 2, 7])
def test_kappa_and_ratios(n):
    jm = GammaJumpModel(0.7)
    u = 1.3
    ref, _ = integrate.quad(lambda s: s**n * np.exp(-s * u) * stats.gamma(0.7).pdf(s), 0, np.inf, epsrel=1e-12, limit=200)
    assert jm.kappa(u, n) == pytest.approx(ref, rel=1e-8)
    assert np.exp(jm.log_kappa_ratio(u, n)) == pytest.approx(jm.kappa(u, n + 1) / jm.kappa(u, n), rel=1e-12)
    assert np.exp(jm.log_new_ratio(u)) == pytest.approx(jm.kappa(u, 1) / jm.psi(u), rel=1e-12)
    assert np.exp(jm.log_kappa_ratio(u, n)) == pytest.approx((n + 0.7) / (1 + u))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        GammaJumpModel(0.0)
    jm = GammaJumpModel(1.0)
    with pytest.raises(ValueError):
        jm.psi(-1.0)
    with pytest.raises(ValueError):
        jm.kappa(1.0, 1.5)
    with pytest.raises(ValueError):
        jm.sample_active_jump(0, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_u_conditional(5, 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_u_marginal(0, 3, 1.0, np.random.default_rng(0))


def test_conditional_u_moments(rng):
    u = np.array([sample_u_conditional(10, 4.0, rng) for _ in range(20000)])
    assert u.mean() == pytest.approx(2.5, rel=0.02)


def test_marginal_u_matches_density(rng):
    n, m, a_s = 20, 11, 0.5
    jm = GammaJumpModel(a_s)
    u = np.array([jm.sample_u_marginal(n, m, rng) for _ in range(20000)])
    norm, _ = integrate.quad(lambda x: np.exp(jm.log_u_density(x, n, m)), 0, np.inf, limit=400)
    cdf = lambda t: integrate.quad(lambda x: np.exp(jm.log_u_density(x, n, m)), 0, t, limit=400)[0] / norm
    assert stats.kstest(u[:2000], np.vectorize(cdf)).pvalue > 1e-3
    # E[u] = n / (a_s m - 1) for the beta-prime law
    assert u.mean() == pytest.approx(n / (a_s * m - 1), rel=0.05)


def test_jump_samplers(rng):
    jm = GammaJumpModel(0.4)
    s = jm.sample_active_jump(np.full(20000, 3), 1.0, rng)
    assert s.mean() == pytest.approx(3.4 / 2.0, rel=0.02)
    t = jm.sample_tilted_jump(3.0, rng, size=20000)
    assert t.mean() == pytest.approx(0.4 / 4.0, rel=0.05)
