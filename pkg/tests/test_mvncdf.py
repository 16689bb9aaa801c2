import warnings

import numpy as np
import pytest
from scipy.stats import norm

from proxycert.mgp import OutputCovariance
from proxycert.mvncdf import (AccuracyNotReached, korobov_generator, prediction_entropy,
                              rectangle_probability, safe_probability)


def correlation(L, rng):
    a = rng.normal(size=(L, L))
    c = a @ a.T + 0.5 * np.eye(L)
    d = 1 / np.sqrt(np.diag(c))
    return 0.5 * (c * d[:, None] * d[None, :] + (c * d[:, None] * d[None, :]).T)


def test_degenerate_scale():
    assert safe_probability(np.full(5, 0.5), 0.0, np.eye(5)) == 1.0
    assert safe_probability(np.array([0.5, 1.5]), 0.0, np.eye(2)) == 0.0
    assert safe_probability(np.array([1.0, 1.0]), 0.0, np.eye(2)) == 1.0


def test_independent_two_lines():
    p = safe_probability(np.zeros(2), 1.0, np.eye(2), rng=np.random.default_rng(0))
    assert p == pytest.approx(0.7078609817371410, abs=1e-4)


def test_accepts_output_covariance():
    om = OutputCovariance(np.eye(3))
    p = safe_probability(np.zeros(3), 1.0, om, rng=np.random.default_rng(0))
    assert p == pytest.approx(norm.cdf(1.0) ** 3, abs=1e-4)


def test_product_of_marginals(rng):
    for _ in range(20):
        L = int(rng.integers(1, 8))
        mean = rng.uniform(-0.5, 1.5, L)
        scale = rng.uniform(0.01, 2.0)
        diag = rng.uniform(0.5, 2.0, L)
        p = safe_probability(mean, scale, np.diag(diag), rng=rng)
        exact = np.prod(norm.cdf((1.0 - mean) / np.sqrt(scale * diag)))
        assert abs(p - exact) <= 5e-4


def test_correlated_against_monte_carlo():
    rng = np.random.default_rng(3)
    cov = correlation(5, rng)
    mean = rng.uniform(0.0, 0.6, 5)
    p = safe_probability(mean, 0.3, cov, rng=rng)
    draws = rng.multivariate_normal(mean, 0.3 * cov, size=2_000_000)
    hits = np.mean(np.all(draws <= 1.0, axis=1))
    se = np.sqrt(hits * (1 - hits) / draws.shape[0])
    assert abs(p - hits) <= 3 * se + 1e-4


def test_repeatable_with_fixed_stream():
    cov = correlation(6, np.random.default_rng(1))
    a = safe_probability(np.full(6, 0.2), 0.5, cov, rng=np.random.default_rng(42))
    b = safe_probability(np.full(6, 0.2), 0.5, cov, rng=np.random.default_rng(42))
    assert a == b


def test_monotone_in_mean():
    cov = correlation(4, np.random.default_rng(2))
    mean = np.array([0.1, 0.3, 0.2, 0.4])
    lo = safe_probability(mean, 0.4, cov, rng=np.random.default_rng(0))
    bumped = mean.copy()
    bumped[1] += 0.3
    hi = safe_probability(bumped, 0.4, cov, rng=np.random.default_rng(0))
    assert hi <= lo + 2e-4


def test_result_in_unit_interval(rng):
    for _ in range(10):
        L = int(rng.integers(2, 6))
        p = safe_probability(rng.normal(0, 3, L), rng.uniform(0.01, 5), correlation(L, rng), rng=rng)
        assert 0.0 <= p <= 1.0


def test_error_estimate_reported():
    cov = correlation(5, np.random.default_rng(4))
    est, err, ok = rectangle_probability(np.zeros(5), cov, 1.0, np.random.default_rng(0), accuracy=1e-4)
    assert ok and err <= 1e-4


def test_budget_exhaustion_warns():
    cov = correlation(12, np.random.default_rng(5))
    with pytest.warns(AccuracyNotReached):
        p = safe_probability(np.full(12, 0.3), 0.5, cov, accuracy=1e-9,
                             rng=np.random.default_rng(0), max_points=5000)
    assert 0.0 <= p <= 1.0


def test_stop_if_ends_early():
    cov = correlation(5, np.random.default_rng(6))
    calls = []

    def stop(est, err):
        calls.append(est)
        return True

    _, _, ok = rectangle_probability(np.zeros(5), cov, 1.0, np.random.default_rng(0),
                                     accuracy=1e-12, stop_if=stop)
    assert len(calls) == 1 and not ok


def test_korobov_generator_is_cached_and_valid():
    g = korobov_generator(256, 4)
    assert g[0] == 1 and g.shape == (4,)
    assert korobov_generator(256, 4) is g
    assert np.gcd(int(g[1]), 256) == 1


def test_negative_scale_rejected():
    with pytest.raises(ValueError):
        safe_probability(np.zeros(2), -1.0, np.eye(2))


def test_entropy_values():
    assert prediction_entropy(0.5) == pytest.approx(1.0)
    assert prediction_entropy(0.0) == 0.0
    assert prediction_entropy(1.0) == 0.0
    assert prediction_entropy(0.01) == pytest.approx(0.08079313589591118, rel=1e-10)


def test_entropy_symmetric_and_peaked():
    ps = np.linspace(0.001, 0.999, 101)
    h = np.array([prediction_entropy(p) for p in ps])
    np.testing.assert_allclose(h, h[::-1], atol=1e-12)
    assert np.all(h <= 1.0)
    with pytest.raises(ValueError):
        prediction_entropy(1.5)


def test_no_warning_on_easy_instance():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        safe_probability(np.zeros(3), 0.2, np.eye(3), rng=np.random.default_rng(0))
