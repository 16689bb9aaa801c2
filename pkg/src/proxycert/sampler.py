"""Scenario generation: truncated multivariate Gaussian on the unit hypercube."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from proxycert.rng import Purpose, stream

# Proposals drawn per vectorized rejection round.
_BLOCK = 256


class RejectionBudgetExceeded(RuntimeError):
    """Too many consecutive proposals fell outside the hypercube."""


@dataclass(frozen=True)
class Scenario:
    """Relative available renewable injection per node, in ``[0, 1]^N``."""

    values: np.ndarray
    id: int

    def __len__(self) -> int:
        return self.values.shape[0]


def exponential_covariance(num_nodes: int, scale: float = 0.5, rho: float = 0.5) -> np.ndarray:
    """Spatially correlated node covariance ``scale**2 * rho**|i - j|``."""
    idx = np.arange(num_nodes)
    return scale**2 * rho ** np.abs(np.subtract.outer(idx, idx))


@dataclass(frozen=True)
class SamplerConfig:
    node_covariance: np.ndarray
    seed: int
    max_rejections: int = 100_000
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cov = np.asarray(self.node_covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"node_covariance must be square, got shape {cov.shape}")
        if not np.all(np.isfinite(cov)) or np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("node_covariance must be finite and symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("node_covariance is not positive definite") from exc
        if np.any(np.diag(chol) <= 0):
            raise ValueError("node_covariance is not positive definite")
        if self.max_rejections < 1:
            raise ValueError("max_rejections must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "node_covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def num_nodes(self) -> int:
        return self.node_covariance.shape[0]

    @classmethod
    def default(cls, num_nodes: int, seed: int, scale: float = 0.5, rho: float = 0.5,
                max_rejections: int = 100_000) -> SamplerConfig:
        return cls(exponential_covariance(num_nodes, scale, rho), seed, max_rejections)


def sample_scenario(cfg: SamplerConfig, scenario_id: int,
                    rng: np.random.Generator | None = None) -> Scenario:
    """Draw ``x ~ N(0, cov)`` conditioned on ``x`` in ``[0, 1]^N`` by rejection.

    Without an explicit ``rng`` the draw uses the stream keyed by
    ``(cfg.seed, scenario_id)``, so a scenario is a function of that pair only.
    """
    if rng is None:
        rng = stream(cfg.seed, Purpose.SCENARIO, scenario_id)
    n = cfg.num_nodes
    rejected = 0
    while rejected < cfg.max_rejections:
        block = min(_BLOCK, cfg.max_rejections - rejected)
        proposals = rng.standard_normal((block, n)) @ cfg._chol.T
        inside = np.all((proposals >= 0.0) & (proposals <= 1.0), axis=1)
        if inside.any():
            first = int(np.argmax(inside))
            return Scenario(proposals[first].copy(), int(scenario_id))
        rejected += block
    raise RejectionBudgetExceeded(
        f"{cfg.max_rejections} consecutive proposals outside [0, 1]^{n}; "
        "node_covariance is probably badly scaled"
    )


def sample_batch(cfg: SamplerConfig, count: int, base_id: int = 0) -> list[Scenario]:
    """Scenarios with ids ``base_id .. base_id + count - 1``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [sample_scenario(cfg, base_id + k) for k in range(count)]
