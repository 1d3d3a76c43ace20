import warnings

import numpy as np
import pytest

from conftest import central_difference, lp_wp
from wcoresets.sinkhorn import default_eta, sinkhorn_divergence, sinkhorn_plan


def test_identical_singletons():
    r = sinkhorn_plan([[1.0, 2.0]], [[1.0, 2.0]], eta=0.1)
    assert r.cost == 0.0
    np.testing.assert_array_equal(r.plan, [[1.0]])


def test_forced_coupling():
    r = sinkhorn_plan([[0.0, 0.0]], [[3.0, 4.0]], p=2, eta=0.3)
    assert r.cost == pytest.approx(25.0, abs=1e-12)


def test_small_eta_approaches_exact():
    a = np.array([[0.0, 0.0], [1.0, 2.0]])
    b = np.array([[0.5, 0.0], [2.0, 1.0]])
    r = sinkhorn_plan(a, b, p=2, eta=0.001, iters=1000)
    assert abs(r.cost - lp_wp(a, b, 2)) <= 1e-2


@pytest.mark.parametrize("seed", range(5))
def test_marginals_and_upper_bound(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(7, 2)), r.normal(size=(5, 2))
    res = sinkhorn_plan(a, b, p=2, eta=0.2, iters=500)
    assert res.converged
    np.testing.assert_allclose(res.plan.sum(1), 1 / 7, atol=1e-12)
    np.testing.assert_allclose(res.plan.sum(0), 1 / 5, atol=1e-12)
    assert res.plan.min() >= 0
    assert res.cost >= lp_wp(a, b, 2) - 1e-9


def test_weighted_marginals():
    a = np.array([[0.0], [1.0]])
    b = np.array([[0.0], [2.0], [3.0]])
    res = sinkhorn_plan(a, b, p=1, eta=0.5, a_weights=[0.3, 0.7], b_weights=[0.2, 0.2, 0.6], iters=500)
    np.testing.assert_allclose(res.plan.sum(1), [0.3, 0.7], atol=1e-12)
    np.testing.assert_allclose(res.plan.sum(0), [0.2, 0.2, 0.6], atol=1e-12)


def test_non_convergence_is_flagged():
    r = np.random.default_rng(0)
    a, b = r.normal(size=(6, 2)), r.normal(size=(6, 2)) + 3
    with pytest.warns(RuntimeWarning, match="did not converge"):
        res = sinkhorn_plan(a, b, eta=1e-3, iters=2, tol=1e-12)
    assert not res.converged and res.residual > 1e-12 and res.iterations == 2


def test_argument_checks():
    with pytest.raises(ValueError):
        sinkhorn_plan([[0.0]], [[1.0]], eta=0.0)
    with pytest.raises(ValueError):
        sinkhorn_plan([[0.0]], [[1.0]], iters=0)


def test_sd_zero_on_same_multiset():
    y = np.random.default_rng(1).normal(size=(9, 2))
    value, grad = sinkhorn_divergence(y, y[::-1], eta=0.3, iters=1000)
    assert abs(value) <= 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_sd_nonnegative(seed):
    r = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        value, _ = sinkhorn_divergence(r.normal(size=(15, 2)), r.normal(size=(4, 2)), eta=0.5, iters=500)
    assert value >= -1e-8


@pytest.mark.parametrize("p", [1, 2])
def test_sd_gradient_3x2(p):
    r = np.random.default_rng(10 + p)
    y, x = r.normal(size=(3, 2)), r.normal(size=(2, 2))
    sd = lambda s: sinkhorn_divergence(y, s, p, eta=0.5, iters=5000, tol=1e-14, warn=False)[0]  # noqa: E731
    _, g = sinkhorn_divergence(y, x, p, eta=0.5, iters=5000, tol=1e-14, warn=False)
    fd = central_difference(sd, x, 1e-5)
    assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def test_default_eta_is_relative():
    y = np.random.default_rng(0).normal(size=(50, 2))
    assert default_eta(3 * y) == pytest.approx(9 * default_eta(y))
    assert default_eta(3 * y, p=1) == pytest.approx(3 * default_eta(y, p=1))


def test_logsumexp_matches_scipy():
    from scipy.special import logsumexp as reference

    from wcoresets.sinkhorn import logsumexp

    M = np.random.default_rng(0).normal(size=(7, 5)) * 300
    for axis in (0, 1):
        np.testing.assert_allclose(logsumexp(M, axis), reference(M, axis=axis), rtol=1e-14)


def test_sd_of_a_set_with_itself_is_zero_before_convergence():
    a = np.random.default_rng(1).normal(size=(12, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert abs(sinkhorn_divergence(a, a, 2, eta=1e-3, iters=3)[0]) <= 1e-12
