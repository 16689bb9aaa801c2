"""Probability that a Gaussian flow vector stays under its line limits.

``P(Y_l <= t for all l)`` for ``Y ~ N(mean, scale * omega)`` is computed with
Genz's separation-of-variables transform, integrated by randomly shifted
Korobov lattice rules. The spread across shifts gives the error
estimate.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

_TINY = 1e-300
_MAX_LATTICE = 2**14
# Above this size the multiplier search samples candidates instead of trying all.
_FULL_SEARCH = 2048


class AccuracyNotReached(UserWarning):
    """The point budget ran out before the error estimate met the target."""


@lru_cache(maxsize=None)
def korobov_generator(n: int, dim: int) -> np.ndarray:
    """Generating vector ``(1, a, a^2, ...) mod n`` of a good ``n``-point Korobov lattice.

    The multiplier minimizes the weighted ``P_2`` worst-case error with
    weights ``1 / (j + 1)^2``, which favours the leading (most restrictive)
    integration variables.
    """
    if dim == 0:
        return np.zeros(0, dtype=np.int64)
    k = np.arange(n, dtype=np.int64)
    gamma = 1.0 / (np.arange(dim) + 1.0) ** 2
    candidates = np.arange(3, n, 2)
    if n > _FULL_SEARCH:
        candidates = np.random.default_rng(n + dim).choice(candidates, 256, replace=False)
    best_err, best = np.inf, None
    for a in candidates:
        z = np.array([pow(int(a), j, n) for j in range(dim)], dtype=np.int64)
        prod = np.ones(n)
        for j in range(dim):
            x = (k * z[j] % n) / n
            prod *= 1.0 + gamma[j] * 2.0 * np.pi**2 * (x * x - x + 1.0 / 6.0)
        err = prod.mean()
        if err < best_err:
            best_err, best = err, z
    if best is None:
        best = np.ones(dim, dtype=np.int64)
    return best


def _sov_integrand(w: np.ndarray, b: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Genz integrand for upper limits ``b`` at points ``w`` (``n x (L - 1)``)."""
    L = b.size
    n = w.shape[0]
    y = np.empty((n, L - 1))
    e = np.full(n, ndtr(b[0] / chol[0, 0]))
    f = e.copy()
    for i in range(1, L):
        u = np.clip(w[:, i - 1] * e, _TINY, 1.0 - 1e-16)
        y[:, i - 1] = ndtri(u)
        e = ndtr((b[i] - y[:, :i] @ chol[i, :i]) / chol[i, i])
        f *= e
    return f


def rectangle_probability(mean, cov, upper, rng: np.random.Generator, accuracy: float = 1e-4,
                          max_points: int = 1_000_000, n_shifts: int = 8,
                          start_points: int = 256, stop_if=None) -> tuple[float, float, bool]:
    """``P(Y <= upper)`` for ``Y ~ N(mean, cov)``.

    Returns ``(estimate, error_estimate, converged)``; the error estimate is
    three standard errors across random lattice shifts. ``stop_if(estimate,
    error)`` may end refinement early once the caller has what it needs.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    b = np.broadcast_to(np.asarray(upper, dtype=float), mean.shape) - mean
    sd = np.sqrt(np.diag(cov))
    if mean.size == 1:
        return float(ndtr(b[0] / sd[0])), 0.0, True
    # Most restrictive variables first keeps the integrand flatter.
    order = np.argsort(b / sd)
    b = b[order]
    c = cov[np.ix_(order, order)]
    chol = None
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            chol = np.linalg.cholesky(c + jitter * np.eye(c.shape[0]) * np.max(np.diag(c)))
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise np.linalg.LinAlgError("covariance is not positive definite")

    dim = b.size - 1
    n = start_points
    shifts = n_shifts
    used = 0
    sums = []
    while True:
        gen = korobov_generator(n, dim)
        base = (np.arange(n)[:, None] * gen[None, :] % n) / n
        offsets = rng.random((shifts, 1, dim))
        pts = np.abs(2.0 * ((base[None] + offsets) % 1.0) - 1.0).reshape(-1, dim)  # baker's transform
        sums.extend(_sov_integrand(pts, b, chol).reshape(shifts, n).mean(axis=1))
        used += n * shifts
        means = np.asarray(sums[-max(shifts, n_shifts):])
        estimate = float(means.mean())
        error = 3.0 * float(means.std(ddof=1)) / np.sqrt(means.size)
        if error <= accuracy or stop_if is not None and stop_if(estimate, error):
            return min(max(estimate, 0.0), 1.0), error, error <= accuracy
        if n < _MAX_LATTICE:
            n *= 2
            sums = []
        else:
            # Largest lattice reached: keep it and add shifts instead.
            shifts = len(sums)
        if used + n * shifts > max_points:
            return min(max(estimate, 0.0), 1.0), error, False


def safe_probability(mean, scale: float, omega, threshold: float = 1.0, accuracy: float = 1e-4,
                     rng: np.random.Generator | None = None, max_points: int = 1_000_000) -> float:
    """Probability that ``N(mean, scale * omega)`` has every component at most ``threshold``.

    ``scale == 0`` is the point mass at ``mean``. Emits :class:`AccuracyNotReached`
    and returns the best estimate when the point budget is exhausted.
    """
    mean = np.asarray(mean, dtype=float)
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return float(np.all(mean <= threshold))
    om = getattr(omega, "omega", omega)
    if rng is None:
        rng = np.random.default_rng(0)
    p, err, ok = rectangle_probability(mean, scale * np.asarray(om), threshold, rng, accuracy, max_points)
    if not ok:
        warnings.warn(f"rectangle probability error estimate {err:.2e} above target {accuracy:.1e}",
                      AccuracyNotReached, stacklevel=2)
    return p


def prediction_entropy(p: float) -> float:
    """Binary entropy of a Bernoulli(p) outcome in bits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return float((-p * np.log(p) - (1 - p) * np.log1p(-p)) / np.log(2))
