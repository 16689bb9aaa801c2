import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from proxycert.mgp import (DEFAULT_BOUNDS, KernelParams, LocalityConfig, MGPProxy, OutputCovariance,
                           TrainingSet, fit_hyperparameters, gram, kernel, local_subset,
                           log_marginal_likelihood, lml_gradient, omega_from_zone, posterior,
                           robust_cholesky)
from proxycert.netsim import DimensionMismatch, ZoneConfig


def random_omega(L, rng):
    a = rng.normal(size=(L, L))
    c = a @ a.T + L * np.eye(L)
    d = 1 / np.sqrt(np.diag(c))
    c = c * d[:, None] * d[None, :]
    return OutputCovariance(0.5 * (c + c.T))


def dense_posterior(X, Y, x0, p):
    """Conditional Gaussian with Gram matrices from scalar kernel calls."""
    m = X.shape[0]
    K = np.array([[kernel(X[i], X[j], p, same_point=i == j) for j in range(m)] for i in range(m)])
    k = np.array([kernel(X[i], x0, p) for i in range(m)])
    w = np.linalg.solve(K, k)
    return w @ Y, kernel(x0, x0, p, same_point=True) - k @ w


def test_kernel_values():
    p = KernelParams(0.1, 0.9, 0.5)
    x = np.array([0.3, 0.4])
    assert kernel(x, x, p, same_point=True) == pytest.approx(1.0)
    assert kernel(x, x, p) == pytest.approx(0.9)
    assert kernel(np.zeros(2), np.array([0.5, 0.0]), p) == pytest.approx(0.5458775937413701)
    assert kernel(np.zeros(2), np.array([50.0, 0.0]), p) == pytest.approx(0.0, abs=1e-300)


def test_kernel_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        kernel(np.zeros(2), np.zeros(3), KernelParams())


@pytest.mark.parametrize("bad", [(0.1, 0.0, 0.5), (0.1, 0.9, 0.0), (-0.1, 0.9, 0.5)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        KernelParams(*bad)


def test_local_subset_examples():
    loc = LocalityConfig(max_neighbors=2, max_distance=0.5)
    X = np.array([[0.1, 0.0], [0.2, 0.0], [0.9, 0.0]])
    assert list(local_subset(X, np.arange(3), np.zeros(2), loc)) == [0, 1]
    assert local_subset(np.empty((0, 2)), np.empty(0, dtype=int), np.zeros(2), loc).size == 0


def test_local_subset_ties_go_to_lower_id():
    X = np.array([[0.1, 0.0], [0.0, 0.1], [-0.1, 0.0]])
    ids = np.array([7, 3, 5])
    picked = local_subset(X, ids, np.zeros(2), LocalityConfig(2, 1.0))
    assert sorted(ids[picked]) == [3, 5]


def test_local_subset_radius_is_strict():
    X = np.array([[0.5, 0.0]])
    assert local_subset(X, np.array([0]), np.zeros(2), LocalityConfig(5, 0.5)).size == 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), n_star=st.integers(1, 60), d_star=st.floats(0.05, 2.0))
def test_local_subset_nearest_neighbor_oracle(seed, n_star, d_star):
    rng = np.random.default_rng(seed)
    X = rng.random((1000, 3))
    x0 = rng.random(3)
    picked = local_subset(X, np.arange(1000), x0, LocalityConfig(n_star, d_star))
    d = np.linalg.norm(X - x0, axis=1)
    inside = set(np.flatnonzero(d < d_star))
    assert len(picked) <= n_star
    assert set(picked) <= inside
    assert len(picked) == min(n_star, len(inside))
    excluded = list(inside - set(picked))
    if excluded and len(picked):
        assert d[excluded].min() >= d[picked].max()


def test_posterior_prior_and_single_point():
    om = OutputCovariance(np.eye(3))
    p = KernelParams(0.1, 0.9, 0.5)
    prior = posterior(np.empty((0, 2)), np.empty((0, 3)), np.zeros(2), p, om)
    np.testing.assert_array_equal(prior.mu_star, 0.0)
    assert prior.sigma_star == pytest.approx(1.0)
    x = np.array([[0.2, 0.7]])
    y = np.array([[0.4, -1.0, 2.0]])
    one = posterior(x, y, x[0], p, om)
    np.testing.assert_allclose(one.mu_star, 0.9 * y[0])
    assert one.sigma_star == pytest.approx(0.19)
    exact = posterior(x, y, x[0], KernelParams(0.0, 0.9, 0.5), om)
    np.testing.assert_allclose(exact.mu_star, y[0], atol=1e-12)
    assert exact.sigma_star == pytest.approx(0.0, abs=1e-12)


def test_exact_interpolation(rng):
    X = rng.random((15, 4))
    Y = rng.normal(size=(15, 3))
    p = KernelParams(0.0, 1.0, 0.7)
    om = random_omega(3, rng)
    for i in range(15):
        np.testing.assert_allclose(posterior(X, Y, X[i], p, om).mu_star, Y[i], atol=1e-8)


def test_posterior_matches_dense_oracle(rng):
    for _ in range(20):
        m, L = rng.integers(1, 21), rng.integers(1, 6)
        X = rng.random((m, 3))
        Y = rng.normal(size=(m, L))
        p = KernelParams(rng.uniform(0.01, 0.3), rng.uniform(0.3, 2.0), rng.uniform(0.2, 1.0))
        x0 = rng.random(3)
        post = posterior(X, Y, x0, p, random_omega(L, rng))
        mu, sigma = dense_posterior(X, Y, x0, p)
        np.testing.assert_allclose(post.mu_star, mu, rtol=1e-10, atol=1e-10 * np.abs(mu).max())
        assert post.sigma_star == pytest.approx(sigma, rel=1e-10)


def test_posterior_covariance_is_scaled_omega(rng):
    om = random_omega(4, rng)
    post = posterior(rng.random((5, 2)), rng.normal(size=(5, 4)), rng.random(2), KernelParams(), om)
    cov = post.covariance
    d = 1 / np.sqrt(np.diag(cov))
    np.testing.assert_allclose(cov * d[:, None] * d[None, :], om.omega, atol=1e-14)


def test_conditioning_reduces_variance(rng):
    X = rng.random((30, 3))
    Y = rng.normal(size=(30, 2))
    om = OutputCovariance(np.eye(2))
    p = KernelParams(0.05, 0.95, 0.4)
    for _ in range(20):
        x0 = rng.random(3)
        full = posterior(X, Y, x0, p, om).sigma_star
        sub = rng.choice(30, size=rng.integers(0, 30), replace=False)
        assert full <= posterior(X[sub], Y[sub], x0, p, om).sigma_star + 1e-9


def test_lml_scalar_case():
    om = OutputCovariance(np.eye(1))
    p = KernelParams(0.0, 1.0, 1.0)
    assert log_marginal_likelihood(np.zeros((1, 1)), np.zeros((1, 1)), p, om) == pytest.approx(
        -0.9189385332046727)


def test_lml_scaling_changes_trace_only(rng):
    X, Y = rng.random((6, 2)), rng.normal(size=(6, 3))
    om, p = random_omega(3, rng), KernelParams()
    base = log_marginal_likelihood(X, np.zeros_like(Y), p, om)
    trace1 = log_marginal_likelihood(X, Y, p, om) - base
    trace3 = log_marginal_likelihood(X, 3 * Y, p, om) - base
    assert trace3 == pytest.approx(9 * trace1, rel=1e-12)


def test_lml_matches_kronecker_oracle(rng):
    for _ in range(10):
        m, L = 3, rng.integers(1, 5)
        X, Y = rng.random((m, 2)), rng.normal(size=(m, L))
        om = random_omega(L, rng)
        p = KernelParams(rng.uniform(0.01, 0.5), rng.uniform(0.5, 2), rng.uniform(0.2, 2))
        K = np.array([[kernel(X[i], X[j], p, same_point=i == j) for j in range(m)] for i in range(m)])
        # vec stacks columns, so cov(vec Y) = Omega kron Sigma.
        ref = multivariate_normal(np.zeros(m * L), np.kron(om.omega, K)).logpdf(Y.flatten(order="F"))
        assert log_marginal_likelihood(X, Y, p, om) == pytest.approx(ref, rel=1e-10)


def test_lml_gradient_finite_difference(rng):
    for _ in range(10):
        X, Y = rng.random((12, 3)), rng.normal(size=(12, 2))
        om = random_omega(2, rng)
        theta = np.log([rng.uniform(0.05, 0.5), rng.uniform(0.5, 2), rng.uniform(0.3, 1.5)])
        g = lml_gradient(X, Y, KernelParams.from_log(theta), om)
        h = 1e-5
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (log_marginal_likelihood(X, Y, KernelParams.from_log(theta + e), om)
                  - log_marginal_likelihood(X, Y, KernelParams.from_log(theta - e), om)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def sample_gp(rng, true, m=200, dim=2, L=2):
    om = OutputCovariance(np.array([[1.0, 0.5], [0.5, 1.0]]))
    X = rng.uniform(0, 4, (m, dim))
    Y = np.linalg.cholesky(gram(X, true)) @ rng.standard_normal((m, L)) @ om.chol.T
    return X, Y, om


def test_fit_recovers_length_scale():
    fitted = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X, Y, om = sample_gp(rng, KernelParams(0.01, 1.0, 0.8))
        fitted.append(fit_hyperparameters(X, Y, KernelParams(), om, rng).length_scale)
    assert 0.8 / 1.5 <= np.mean(fitted) <= 0.8 * 1.5


def test_fit_never_lowers_likelihood(rng):
    X, Y, om = sample_gp(rng, KernelParams(0.05, 1.0, 1.0), m=30)
    grid = [KernelParams(s0, sf, ls) for s0 in (0.01, 0.1) for sf in (0.5, 1, 2) for ls in (0.5, 1, 2)]
    init = max(grid, key=lambda p: log_marginal_likelihood(X, Y, p, om))
    out = fit_hyperparameters(X, Y, init, om, rng)
    assert log_marginal_likelihood(X, Y, out, om) >= log_marginal_likelihood(X, Y, init, om)
    lo, hi = np.array(DEFAULT_BOUNDS).T
    theta = np.array([out.sigma0_sq, out.sigmaf_sq, out.length_scale])
    assert np.all(theta >= lo * (1 - 1e-9)) and np.all(theta <= hi * (1 + 1e-9))


def test_fit_noise_free_hits_lower_noise_bound(rng):
    X = rng.uniform(0, 1, (40, 1))
    Y = np.column_stack([np.sin(3 * X[:, 0]), np.cos(2 * X[:, 0])])
    out = fit_hyperparameters(X, Y, KernelParams(), OutputCovariance(np.eye(2)), rng)
    assert out.sigma0_sq < 1e-4


def test_fit_needs_five_points(rng):
    with pytest.raises(ValueError):
        fit_hyperparameters(rng.random((4, 2)), rng.random((4, 1)), KernelParams(),
                            OutputCovariance(np.eye(1)), rng)


def test_robust_cholesky_jitters_singular_matrix():
    K = np.ones((3, 3))
    L = robust_cholesky(K)
    np.testing.assert_allclose(L @ L.T, K, atol=1e-5)


def test_omega_identical_and_orthogonal_rows():
    same = omega_from_zone(ZoneConfig(np.tile([0.1, 0.2, 0.3], (3, 1))))
    assert np.linalg.eigvalsh(same.omega)[0] >= 1e-8
    np.testing.assert_allclose(np.diag(same.omega), 1.0)
    np.testing.assert_allclose(same.omega, 1.0, atol=1e-2)
    ortho = omega_from_zone(ZoneConfig(np.eye(3)))
    np.testing.assert_allclose(ortho.omega, np.eye(3))


def test_omega_reference_zone(reference_zone):
    om = omega_from_zone(reference_zone)
    assert om.size == reference_zone.num_lines
    np.testing.assert_allclose(np.diag(om.omega), 1.0)
    np.testing.assert_array_equal(om.omega, om.omega.T)
    assert np.linalg.eigvalsh(om.omega)[0] >= 1e-8


def test_invalid_omega():
    with pytest.raises(ValueError):
        OutputCovariance(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        OutputCovariance(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_training_snapshot_survives_growth():
    ts = TrainingSet(2, 1, capacity=2)
    ts.add(np.zeros(2), np.zeros(1), 0)
    X, Y, ids = ts.snapshot()
    for k in range(1, 10):
        ts.add(np.full(2, k), np.full(1, k), k)
    np.testing.assert_array_equal(X, [[0.0, 0.0]])
    assert len(ts) == 10
    assert list(ts.snapshot()[2]) == list(range(10))


def test_proxy_predict_and_refit(rng):
    om = OutputCovariance(np.eye(2))
    proxy = MGPProxy(KernelParams(), om, LocalityConfig(10, 2.0), num_nodes=2)
    assert proxy.predict(np.zeros(2)).sigma_star == pytest.approx(1.0)
    for k in range(30):
        x = rng.random(2)
        proxy.train.add(x, np.array([x.sum(), x[0]]), k)
    assert proxy.predict(np.full(2, 0.5)).sigma_star < 0.5
    before = log_marginal_likelihood(*proxy.train.snapshot()[:2], proxy.params, om)
    proxy.refit(rng)
    assert log_marginal_likelihood(*proxy.train.snapshot()[:2], proxy.params, om) >= before
