"""Multivariate Gaussian process proxy with a shared output covariance.

The vector output ``y`` in ``R^L`` of a scenario is modelled as a matrix-variate
Gaussian process: a scalar squared-exponential kernel across scenarios and a
fixed ``L x L`` covariance ``omega`` across lines. The posterior at a new
scenario is ``N(mu_star, sigma_star * omega)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from proxycert.netsim import DimensionMismatch

logger = logging.getLogger(__name__)

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG2PI = np.log(2 * np.pi)

# Bounds on (sigma0_sq, sigmaf_sq, length_scale).
DEFAULT_BOUNDS = ((1e-6, 1.0), (1e-3, 10.0), (1e-2, 10.0))


class NumericalFailure(np.linalg.LinAlgError):
    pass


class OptimizationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelParams:
    sigma0_sq: float = 0.1
    sigmaf_sq: float = 0.9
    length_scale: float = 0.5

    def __post_init__(self):
        if not (self.sigmaf_sq > 0 and self.length_scale > 0 and self.sigma0_sq >= 0):
            raise ValueError(f"invalid kernel parameters {self}")

    def as_log(self) -> np.ndarray:
        return np.log([self.sigma0_sq, self.sigmaf_sq, self.length_scale])

    @classmethod
    def from_log(cls, theta) -> KernelParams:
        s0, sf, ls = np.exp(theta)
        return cls(float(s0), float(sf), float(ls))


@dataclass(frozen=True)
class OutputCovariance:
    omega: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError("omega must be square")
        if np.max(np.abs(om - om.T)) > 1e-12:
            raise ValueError("omega must be symmetric")
        if np.linalg.eigvalsh(om)[0] <= 0:
            raise ValueError("omega must be positive definite")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "chol", np.linalg.cholesky(om))

    @property
    def size(self) -> int:
        return self.omega.shape[0]

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


@dataclass(frozen=True)
class LocalityConfig:
    max_neighbors: int = 64
    max_distance: float = 0.75

    def __post_init__(self):
        if self.max_neighbors < 1 or not self.max_distance > 0:
            raise ValueError("max_neighbors must be >= 1 and max_distance > 0")


@dataclass(frozen=True)
class PosteriorPrediction:
    mu_star: np.ndarray
    sigma_star: float
    omega: OutputCovariance

    @property
    def covariance(self) -> np.ndarray:
        return self.sigma_star * self.omega.omega


class TrainingSet:
    """Growing store of simulated ``(scenario, flows)`` pairs.

    Arrays returned by :meth:`snapshot` are views that later appends never
    modify, so a batch of predictions can run against a fixed snapshot.
    """

    def __init__(self, num_nodes: int, num_lines: int, capacity: int = 1024):
        self._x = np.empty((capacity, num_nodes))
        self._y = np.empty((capacity, num_lines))
        self._ids = np.empty(capacity, dtype=np.int64)
        self._m = 0

    def __len__(self) -> int:
        return self._m

    def add(self, x: np.ndarray, y: np.ndarray, scenario_id: int) -> None:
        if self._m == self._x.shape[0]:
            grow = 2 * self._x.shape[0]
            # Reallocate instead of resizing in place so old snapshots stay valid.
            self._x = np.concatenate([self._x, np.empty_like(self._x)])[:grow]
            self._y = np.concatenate([self._y, np.empty_like(self._y)])[:grow]
            self._ids = np.concatenate([self._ids, np.empty_like(self._ids)])[:grow]
        self._x[self._m] = x
        self._y[self._m] = y
        self._ids[self._m] = scenario_id
        self._m += 1

    def snapshot(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self._m
        return self._x[:m], self._y[:m], self._ids[:m]


def kernel(x1, x2, p: KernelParams, same_point: bool = False) -> float:
    """Squared-exponential covariance plus observation noise on the diagonal.

    ``same_point`` marks the two arguments as the very same observation (the
    same draw), which is the only case the noise term applies. Two distinct
    draws at equal coordinates are separate noisy observations.
    """
    a = np.asarray(getattr(x1, "values", x1), dtype=float)
    b = np.asarray(getattr(x2, "values", x2), dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    return p.sigmaf_sq * np.exp(-sq / (2 * p.length_scale**2)) + (p.sigma0_sq if same_point else 0.0)


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def gram(X: np.ndarray, p: KernelParams) -> np.ndarray:
    """Training covariance ``Sigma_m`` (noise on the diagonal)."""
    K = p.sigmaf_sq * np.exp(-_sqdist(X, X) / (2 * p.length_scale**2))
    K[np.diag_indices_from(K)] = p.sigmaf_sq + p.sigma0_sq
    return K


def cross_cov(X: np.ndarray, x0: np.ndarray, p: KernelParams) -> np.ndarray:
    return p.sigmaf_sq * np.exp(-np.sum((X - x0) ** 2, axis=1) / (2 * p.length_scale**2))


def robust_cholesky(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding escalating diagonal jitter on failure."""
    for jitter in _JITTERS:
        try:
            A = K if jitter == 0.0 else K + jitter * np.eye(K.shape[0])
            return np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            continue
    raise NumericalFailure("covariance matrix is not positive definite even with jitter 1e-6")


def local_subset(X: np.ndarray, ids: np.ndarray, x0, loc: LocalityConfig) -> np.ndarray:
    """Indices of training points strictly within ``max_distance`` of ``x0``.

    At most ``max_neighbors`` are kept, nearest first, ties going to the lower id.
    """
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    x0 = np.asarray(getattr(x0, "values", x0), dtype=float)
    d2 = np.sum((X - x0) ** 2, axis=1)
    inside = np.flatnonzero(d2 < loc.max_distance**2)
    if inside.size > loc.max_neighbors:
        order = np.lexsort((ids[inside], d2[inside]))
        inside = inside[order[: loc.max_neighbors]]
    return inside


def posterior(X: np.ndarray, Y: np.ndarray, x0, p: KernelParams,
              omega: OutputCovariance) -> PosteriorPrediction:
    """Conditional law of the output at ``x0`` given training pairs ``(X, Y)``.

    Zero prior mean. ``sigma_star`` is clamped at 0 against round-off.
    """
    x0 = np.asarray(getattr(x0, "values", x0), dtype=float)
    prior = p.sigmaf_sq + p.sigma0_sq
    if X.shape[0] == 0:
        return PosteriorPrediction(np.zeros(omega.size), prior, omega)
    chol = robust_cholesky(gram(X, p))
    k = cross_cov(X, x0, p)
    mu = k @ cho_solve((chol, True), Y)
    v = solve_triangular(chol, k, lower=True, check_finite=False)
    sigma = max(prior - float(v @ v), 0.0)
    return PosteriorPrediction(mu, sigma, omega)


def log_marginal_likelihood(X: np.ndarray, Y: np.ndarray, p: KernelParams,
                            omega: OutputCovariance) -> float:
    """Log density of ``Y`` (``m x L``) under ``MN(0, Sigma_m, omega)``."""
    return _lml_and_grad(X, Y, p, omega, with_grad=False)[0]


def _lml_and_grad(X, Y, p: KernelParams, omega: OutputCovariance, with_grad: bool = True):
    m, L = Y.shape
    sq = _sqdist(X, X)
    np.fill_diagonal(sq, 0.0)
    Kf = p.sigmaf_sq * np.exp(-sq / (2 * p.length_scale**2))
    K = Kf.copy()
    K[np.diag_indices(m)] = p.sigmaf_sq + p.sigma0_sq
    np.fill_diagonal(Kf, p.sigmaf_sq)
    chol = robust_cholesky(K)
    alpha = cho_solve((chol, True), Y)  # Sigma^-1 Y
    beta = cho_solve((omega.chol, True), alpha.T).T  # Sigma^-1 Y Omega^-1
    quad = float(np.sum(Y * beta))
    logdet_k = 2.0 * float(np.sum(np.log(np.diag(chol))))
    lml = -0.5 * quad - 0.5 * L * logdet_k - 0.5 * m * omega.logdet() - 0.5 * m * L * LOG2PI
    if not with_grad:
        return lml, None
    # d lml / d Sigma = (A - L Sigma^-1) / 2 with A = Sigma^-1 Y Omega^-1 Y^T Sigma^-1
    inner = beta @ alpha.T - L * cho_solve((chol, True), np.eye(m))
    grad = np.array([
        0.5 * p.sigma0_sq * np.trace(inner),
        0.5 * float(np.sum(inner * Kf)),
        0.5 * float(np.sum(inner * Kf * sq)) / p.length_scale**2,
    ])
    return lml, grad


def lml_gradient(X, Y, p: KernelParams, omega: OutputCovariance) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t. the log parameters."""
    return _lml_and_grad(X, Y, p, omega)[1]


def fit_hyperparameters(X: np.ndarray, Y: np.ndarray, init: KernelParams, omega: OutputCovariance,
                        rng: np.random.Generator, n_starts: int = 3, max_points: int = 500,
                        bounds=DEFAULT_BOUNDS) -> KernelParams:
    """Maximize the marginal likelihood over log-parameters with L-BFGS-B.

    Starts from ``init`` plus ``n_starts - 1`` random points inside ``bounds``,
    on a uniform subsample of at most ``max_points`` pairs. Never returns a
    parameter set with a lower likelihood than ``init`` on that subsample.
    """
    if X.shape[0] < 5:
        raise ValueError("need at least 5 training points to fit")
    if X.shape[0] > max_points:
        keep = np.sort(rng.choice(X.shape[0], size=max_points, replace=False))
        X, Y = X[keep], Y[keep]
    log_bounds = np.log(np.asarray(bounds, dtype=float))
    theta0 = np.clip(init.as_log(), log_bounds[:, 0], log_bounds[:, 1])
    starts = [theta0] + [rng.uniform(log_bounds[:, 0], log_bounds[:, 1]) for _ in range(n_starts - 1)]

    def objective(theta):
        try:
            val, g = _lml_and_grad(X, Y, KernelParams.from_log(theta), omega)
        except NumericalFailure:
            return 1e25, np.zeros(3)
        return -val, -g

    best_theta, best_val = None, -np.inf
    for theta in starts:
        try:
            res = minimize(objective, theta, jac=True, method="L-BFGS-B", bounds=log_bounds)
        except (ValueError, FloatingPointError) as exc:
            logger.debug("start %s failed: %s", theta, exc)
            continue
        if np.isfinite(res.fun) and res.fun < 1e25 and -res.fun > best_val:
            best_theta, best_val = res.x, -res.fun
    if best_theta is None:
        raise OptimizationFailed("every optimizer start failed")
    try:
        init_val = log_marginal_likelihood(X, Y, init, omega)
    except NumericalFailure:
        init_val = -np.inf
    if init_val >= best_val:
        return init
    return KernelParams.from_log(best_theta)


def omega_from_zone(zone) -> OutputCovariance:
    """Cosine similarity of the PTDF rows, regularized to be safely PD, unit diagonal."""
    rows = np.asarray(zone.ptdf, dtype=float)
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0] = 1.0
    unit = rows / norms[:, None]
    corr = unit @ unit.T
    corr = 0.5 * (corr + corr.T)
    for lam in (0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0):
        c = corr + lam * np.eye(corr.shape[0])
        d = 1.0 / np.sqrt(np.diag(c))
        c = c * d[:, None] * d[None, :]
        c = 0.5 * (c + c.T)
        np.fill_diagonal(c, 1.0)
        if np.linalg.eigvalsh(c)[0] >= 1e-8:
            return OutputCovariance(c)
    raise NumericalFailure("could not regularize the PTDF row correlation")


class MGPProxy:
    """Local MGP predictor over a growing training set."""

    def __init__(self, params: KernelParams, omega: OutputCovariance, locality: LocalityConfig,
                 num_nodes: int):
        self.params = params
        self.omega = omega
        self.locality = locality
        self.train = TrainingSet(num_nodes, omega.size)

    def predict(self, x0, snapshot=None) -> PosteriorPrediction:
        X, Y, ids = self.train.snapshot() if snapshot is None else snapshot
        idx = local_subset(X, ids, x0, self.locality)
        return posterior(X[idx], Y[idx], x0, self.params, self.omega)

    def refit(self, rng: np.random.Generator, max_points: int = 500, n_starts: int = 3) -> KernelParams:
        X, Y, _ = self.train.snapshot()
        try:
            self.params = fit_hyperparameters(X, Y, self.params, self.omega, rng, n_starts=n_starts,
                                              max_points=max_points)
        except OptimizationFailed:
            logger.warning("hyperparameter fit failed; keeping %s", self.params)
        return self.params
