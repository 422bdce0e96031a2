import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cosine_kernel
from pdppmix.errors import DomainError, NumericalError, SingularConfigurationWarning
from pdppmix.kernel import (
    Domain,
    FourierProjectionKernel,
    diagonal_integral,
    eval_kernel,
    global_repulsiveness,
    gram_matrix,
    has_duplicates,
    log_det_gram,
    make_palm,
    pair_correlation,
)


def test_domain_affine_map():
    dom = Domain([-1.0, 2.0], [3.0, 2.5])
    assert np.allclose(dom.A, np.diag([4.0, 0.5]))
    assert np.allclose(dom.b, [1.0, 2.25])
    assert dom.volume() == pytest.approx(2.0)
    x = np.array([[0.0, 2.1]])
    assert np.allclose(dom.from_unit(dom.to_unit(x)), x)


@pytest.mark.parametrize("lower,upper", [([0.0], [0.0]), ([1.0], [0.0]), ([0.0, 0.0], [1.0]), ([np.inf], [1.0])])
def test_domain_rejects_bad_bounds(lower, upper):
    with pytest.raises(ValueError):
        Domain(lower, upper)


def test_points_outside_domain_raise(unit_kernel):
    with pytest.raises(DomainError):
        unit_kernel.eval([0.7], [0.0])
    with pytest.raises(DomainError):
        unit_kernel.matrix(np.array([[0.0], [0.51]]))


def test_diagonal_is_constant_intensity():
    k = FourierProjectionKernel(Domain([-2.0, 0.0], [2.0, 1.0]), 2)
    assert k.m == 25
    pts = np.array([[-1.9, 0.1], [0.3, 0.9], [1.5, 0.5]])
    assert np.allclose(np.diag(k.matrix(pts)), 25 / 4.0)
    assert np.allclose(k.diag(pts), 25 / 4.0)


@pytest.mark.parametrize("d,ell", [(1, 0), (1, 3), (2, 1), (2, 2), (3, 1)])
def test_matches_explicit_cosine_sum(d, ell, rng):
    lower = rng.uniform(-3, 0, d)
    upper = lower + rng.uniform(0.5, 4, d)
    k = FourierProjectionKernel(Domain(lower, upper), ell)
    X = lower + (upper - lower) * rng.random((6, d))
    M = k.matrix(X)
    ref = np.array([[cosine_kernel(a, b, lower, upper, ell) for b in X] for a in X])
    assert np.allclose(M, ref, rtol=1e-12, atol=1e-12)


def test_gram_has_rank_m(rng):
    k = FourierProjectionKernel(Domain([0.0], [1.0]), 2)
    X = rng.random((20, 1))
    ev = np.linalg.eigvalsh(k.matrix(X))
    assert np.all(ev > -1e-9)
    assert np.sum(ev > 1e-8 * ev.max()) == k.m


def test_two_point_log_det(unit_kernel):
    # K(x, x) = 3 and K(-1/6, 1/6) = 1 + 2 cos(2 pi / 3) = 0
    res = log_det_gram(unit_kernel, np.array([[-1 / 6], [1 / 6]]))
    assert res.positive
    assert res.value == pytest.approx(np.log(9.0), abs=1e-12)


def test_coincident_points_are_singular(unit_kernel):
    pts = np.array([[0.1], [0.1]])
    assert has_duplicates(pts, unit_kernel.domain)
    with pytest.warns(SingularConfigurationWarning):
        G = gram_matrix(unit_kernel, pts)
    assert abs(np.linalg.det(G)) < 1e-12
    assert log_det_gram(unit_kernel, pts) == (-np.inf, False)


def test_more_than_m_points_is_singular(unit_kernel):
    pts = np.array([[-0.4], [-0.1], [0.2], [0.45]])
    assert not log_det_gram(unit_kernel, pts).positive


def test_eval_kernel_symmetric(unit_kernel):
    assert eval_kernel(unit_kernel, [0.1], [-0.3]) == pytest.approx(eval_kernel(unit_kernel, [-0.3], [0.1]))


@settings(max_examples=50, deadline=None)
@given(
    x=st.floats(-1.0, 1.0), y=st.floats(-1.0, 1.0), s=st.floats(-0.5, 0.5), ell=st.integers(0, 6)
)
def test_kernel_depends_on_difference_only(x, y, s, ell):
    # periodic in the unit-scaled difference, so shifting both points changes nothing
    k = FourierProjectionKernel(Domain([-2.0], [2.0]), ell)
    a = k.eval([x], [y])
    b = k.eval([x + s], [y + s])
    assert a == pytest.approx(b, abs=1e-9)
    assert abs(a) <= k.diagonal + 1e-9


@pytest.mark.parametrize("k_cond", [1, 2, 3, 4])
def test_palm_identities(k_cond, rng):
    kern = FourierProjectionKernel(Domain([-1.0], [2.0]), 2)
    cond = rng.uniform(-1, 2, (k_cond, 1))
    palm = make_palm(kern, cond)
    assert palm.cardinality == kern.m - k_cond
    assert np.all(np.abs(palm.diag(cond)) < 1e-10)
    val, _ = diagonal_integral(palm)
    assert val == pytest.approx(kern.m - k_cond, abs=1e-6)


def test_palm_is_schur_complement(rng):
    kern = FourierProjectionKernel(Domain([0.0, 0.0], [1.0, 2.0]), 1)
    cond = rng.random((3, 2)) * [1, 2]
    X = rng.random((5, 2)) * [1, 2]
    palm = make_palm(kern, cond)
    Kxc = kern.matrix(X, cond)
    ref = kern.matrix(X) - Kxc @ np.linalg.solve(kern.matrix(cond), Kxc.T)
    assert np.allclose(palm.matrix(X), ref, atol=1e-10)
    assert np.allclose(palm.diag(X), np.diag(ref), atol=1e-10)


def test_palm_rejects_bad_conditioning(unit_kernel):
    with pytest.raises(ValueError):
        make_palm(unit_kernel, np.array([[-0.4], [-0.1], [0.2], [0.45]]))
    with pytest.raises(NumericalError):
        make_palm(unit_kernel, np.array([[0.1], [0.1]]))
    assert make_palm(unit_kernel, None).cardinality == 3


def test_palm_at_full_rank_vanishes(unit_kernel):
    palm = make_palm(unit_kernel, np.array([[-1 / 3], [0.0], [1 / 3]]))
    assert palm.cardinality == 0
    assert np.all(np.abs(palm.diag(np.linspace(-0.5, 0.5, 11)[:, None])) < 1e-10)


def test_pair_correlation(unit_kernel):
    assert pair_correlation(unit_kernel, [0.0], [1 / 3]) == pytest.approx(1.0, abs=1e-12)
    assert pair_correlation(unit_kernel, [0.2], [0.2]) == pytest.approx(0.0, abs=1e-12)
    near = pair_correlation(unit_kernel, [0.0], [0.02])
    assert 0.0 < near < 0.1


@pytest.mark.parametrize("ell", [1, 5])
def test_global_repulsiveness_1d(ell):
    k = FourierProjectionKernel(Domain([-3.0], [5.0]), ell)
    for x in (-2.9, 0.0, 4.2):
        p, err = global_repulsiveness(k, [x], return_error=True)
        assert p == pytest.approx(1.0, abs=1e-6)
        assert err < 1e-8


def test_global_repulsiveness_2d():
    k = FourierProjectionKernel(Domain([0.0, -1.0], [2.0, 1.0]), 2)
    assert global_repulsiveness(k, [0.3, 0.4]) == pytest.approx(1.0, abs=1e-8)


def test_global_repulsiveness_3d_monte_carlo():
    k = FourierProjectionKernel(Domain([0.0] * 3, [1.0] * 3), 1)
    p, err = global_repulsiveness(k, [0.5, 0.5, 0.5], return_error=True, rng=np.random.default_rng(1))
    assert abs(p - 1.0) < 4 * err


def test_gram_matrix_without_duplicates_does_not_warn(unit_kernel):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gram_matrix(unit_kernel, np.array([[-0.3], [0.2]]))
