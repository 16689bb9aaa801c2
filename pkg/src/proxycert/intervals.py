"""Confidence intervals on the safety probability.

The classic interval is the score (Wilson) interval on simulated outcomes.
The uncertainty-aware interval works on records ``(w, q)`` where ``w`` is a
predicted or simulated outcome and ``q`` the probability that ``w`` equals
the true outcome. It debiases the outcome average, replaces ``m`` by an
effective sample size and widens the interval by the prediction variance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


class DegenerateWeights(ArithmeticError):
    pass


class Estimator(enum.Enum):
    CLASSIC = "classic"
    UNCERTAINTY_AWARE = "uncertainty_aware"


@dataclass(frozen=True)
class ConfidenceInterval:
    p_min: float
    p_max: float
    alpha: float
    estimator: Estimator

    @property
    def length(self) -> float:
        return self.p_max - self.p_min

    @property
    def center(self) -> float:
        return 0.5 * (self.p_min + self.p_max)

    def contains(self, p: float) -> bool:
        return self.p_min <= p <= self.p_max


@dataclass(frozen=True)
class OutcomeRecord:
    w: bool
    q: float
    simulated: bool
    scenario_id: int


@dataclass(frozen=True)
class CltSummary:
    z_bar: float
    v: float
    sigma_sq: float
    m: int


@dataclass(frozen=True)
class DecisionThresholds:
    """Keep the proxy's answer when ``p <= p_inf`` or ``p >= p_sup``.

    A threshold of exactly 0 (``p_inf``) or 1 (``p_sup``) disables that side,
    so ``DecisionThresholds(0, 1)`` never trusts the proxy.
    """

    p_inf: float = 0.01
    p_sup: float = 0.99

    def __post_init__(self):
        if not (0.0 <= self.p_inf < 0.5 < self.p_sup <= 1.0):
            raise ValueError(f"need 0 <= p_inf < 0.5 < p_sup <= 1, got {self.p_inf}, {self.p_sup}")

    def trusts(self, p: float) -> bool:
        return (self.p_inf > 0.0 and p <= self.p_inf) or (self.p_sup < 1.0 and p >= self.p_sup)


def quantile(alpha: float) -> float:
    """Two-sided standard normal quantile ``Q_{alpha/2}``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(norm.ppf(1.0 - alpha / 2.0))


def score_bounds(center, n, extra_var, z):
    """Roots of ``n (center - p)^2 = z^2 (extra_var + p (1 - p))``, clamped to ``[0, 1]``.

    Vectorized over ``center``, ``n`` and ``extra_var``.
    """
    center = np.asarray(center, dtype=float)
    n = np.asarray(n, dtype=float)
    t = z * z / n
    disc = center * (1.0 - center) / n + extra_var / n * (1.0 + t) + z * z / (4.0 * n * n)
    half = z * np.sqrt(np.maximum(disc, 0.0))
    mid = center + z * z / (2.0 * n)
    denom = 1.0 + t
    lo = np.clip((mid - half) / denom, 0.0, 1.0)
    hi = np.clip((mid + half) / denom, 0.0, 1.0)
    return lo, hi


def classic_interval(w_values, alpha: float = 0.05) -> ConfidenceInterval:
    w = np.asarray(w_values, dtype=float)
    if w.size < 1:
        raise ValueError("need at least one outcome")
    lo, hi = score_bounds(w.mean(), w.size, 0.0, quantile(alpha))
    return ConfidenceInterval(float(lo), float(hi), alpha, Estimator.CLASSIC)


def clt_summary(records=None, *, w=None, q=None) -> CltSummary:
    """Debiased average, effective sample size and prediction variance of ``(w, q)`` records."""
    if records is not None:
        w = np.fromiter((r.w for r in records), dtype=float)
        q = np.fromiter((r.q for r in records), dtype=float)
    w = np.asarray(w, dtype=float)
    q = np.asarray(q, dtype=float)
    weight = 2.0 * q - 1.0
    s1 = float(weight.sum())
    s2 = float(np.sum(weight * weight))
    if s2 == 0.0 or s1 <= 0.0:
        raise DegenerateWeights("sum of (2q - 1) must be positive")
    return CltSummary(
        z_bar=float(np.sum(w - (1.0 - q))) / s1,
        v=s1 * s1 / s2,
        sigma_sq=float(np.sum(q * (1.0 - q))) / s2,
        m=int(w.size),
    )


def uncertainty_interval(s: CltSummary, alpha: float = 0.05) -> ConfidenceInterval:
    lo, hi = score_bounds(s.z_bar, s.v, s.sigma_sq, quantile(alpha))
    return ConfidenceInterval(float(lo), float(hi), alpha, Estimator.UNCERTAINTY_AWARE)


def running_bounds(w, q, alpha: float = 0.05):
    """Uncertainty-aware bounds after each prefix of the records, as two arrays."""
    w = np.asarray(w, dtype=float)
    q = np.asarray(q, dtype=float)
    weight = 2.0 * q - 1.0
    s1 = np.cumsum(weight)
    s2 = np.cumsum(weight * weight)
    z_bar = np.cumsum(w - (1.0 - q)) / s1
    return score_bounds(z_bar, s1 * s1 / s2, np.cumsum(q * (1.0 - q)) / s2, quantile(alpha))


def draw_prediction(p: float, thresholds: DecisionThresholds, rng: np.random.Generator,
                    scenario_id: int = -1) -> OutcomeRecord | None:
    """Turn a confident proxy probability into a record; ``None`` means simulate.

    ``w ~ Bernoulli(p)`` with ``q = p`` if ``w`` is 1 else ``1 - p``, so that
    ``P(w = z) = q`` holds whatever ``w`` comes out.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if not thresholds.trusts(p):
        return None
    w = bool(rng.random() < p)
    return OutcomeRecord(w, p if w else 1.0 - p, False, scenario_id)
