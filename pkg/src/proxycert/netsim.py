"""Fictitious zone simulator: noisy PTDF flows scaled by a curtailment coefficient."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from proxycert.rng import Purpose, stream
from proxycert.sampler import SamplerConfig, Scenario, sample_scenario

DELTA_MARGIN = 1e-3


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ZoneConfig:
    """A zone: PTDF normalized by line limits plus simulator settings.

    Flows are relative (``F_l / Fbar_l``) throughout, so the PTDF rows are
    already divided by the line limits.
    """

    ptdf: np.ndarray
    noise_sigma: float = 0.01
    history_size: int = 500
    eta: float = 0.25
    seed: int = 0
    reference_p_safe: float | None = None

    def __post_init__(self):
        ptdf = np.asarray(self.ptdf, dtype=float)
        if ptdf.ndim != 2 or 0 in ptdf.shape:
            raise ValueError(f"ptdf must be a non-empty L x N matrix, got shape {ptdf.shape}")
        if not np.all(np.isfinite(ptdf)):
            raise ValueError("ptdf entries must be finite")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.history_size < 1:
            raise ValueError("history_size must be at least 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        object.__setattr__(self, "ptdf", ptdf)

    @property
    def num_lines(self) -> int:
        return self.ptdf.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.ptdf.shape[1]

    def to_dict(self) -> dict:
        out = {
            "ptdf": self.ptdf.tolist(),
            "noise_sigma": self.noise_sigma,
            "history_size": self.history_size,
            "eta": self.eta,
            "seed": self.seed,
        }
        if self.reference_p_safe is not None:
            out["reference_p_safe"] = self.reference_p_safe
        return out


def load_zone(path) -> ZoneConfig:
    with open(path) as fh:
        doc = json.load(fh)
    return ZoneConfig(
        ptdf=np.array(doc["ptdf"], dtype=float),
        noise_sigma=float(doc.get("noise_sigma", 0.01)),
        history_size=int(doc.get("history_size", 500)),
        eta=float(doc.get("eta", 0.25)),
        seed=int(doc.get("seed", 0)),
        reference_p_safe=doc.get("reference_p_safe"),
    )


def save_zone(zone: ZoneConfig, path) -> None:
    Path(path).write_text(json.dumps(zone.to_dict(), indent=2) + "\n")


def make_reference_zone(seed: int = 0, num_lines: int = 5, num_nodes: int = 10,
                        low: float = 0.05, high: float = 0.30) -> ZoneConfig:
    """Zone whose PTDF entries are drawn once from ``U(low, high)``."""
    rng = stream(seed, Purpose.ZONE)
    ptdf = rng.uniform(low, high, size=(num_lines, num_nodes))
    return ZoneConfig(ptdf=ptdf, seed=seed)


@dataclass(frozen=True)
class CurtailmentHistory:
    """Past curtailment decisions keyed by total injection, with the matching window ``eta``."""

    totals: np.ndarray
    betas: np.ndarray
    eta: float = 0.25

    def __post_init__(self):
        totals = np.asarray(self.totals, dtype=float)
        betas = np.asarray(self.betas, dtype=float)
        if totals.shape != betas.shape or totals.ndim != 1 or totals.size == 0:
            raise ValueError("totals and betas must be equal-length non-empty vectors")
        if np.any((betas < 0) | (betas > 1)):
            raise ValueError("every beta must lie in [0, 1]")
        object.__setattr__(self, "totals", totals)
        object.__setattr__(self, "betas", betas)

    def __len__(self) -> int:
        return self.totals.size


@dataclass(frozen=True)
class FlowResponse:
    flows: np.ndarray
    beta_used: float


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, Scenario) else np.asarray(x, dtype=float)


def raw_flows(zone: ZoneConfig, x, rng: np.random.Generator) -> np.ndarray:
    """Uncurtailed flows ``sum_n (PTDF[l, n] + eps_n) x_n`` with one fresh ``eps_n`` per node."""
    values = _values(x)
    if values.shape != (zone.num_nodes,):
        raise DimensionMismatch(f"scenario has shape {values.shape}, zone expects ({zone.num_nodes},)")
    eps = rng.normal(0.0, zone.noise_sigma, size=zone.num_nodes)
    return zone.ptdf @ values + eps @ values


def curtailment_for(flows: np.ndarray, margin: float = DELTA_MARGIN) -> float:
    """Largest multiplier in ``[0, 1]`` keeping every flow strictly below 1."""
    peak = float(np.max(flows))
    if peak <= 0:
        return 1.0
    return min(1.0, (1.0 - margin) / peak)


def build_history(zone: ZoneConfig, sampler: SamplerConfig) -> CurtailmentHistory:
    """Record ``(total injection, beta_j)`` for ``zone.history_size`` drawn scenarios.

    History scenarios and their PTDF noise come from streams keyed by the zone
    seed, so the history is fixed for a given zone and node covariance.
    """
    totals = np.empty(zone.history_size)
    betas = np.empty(zone.history_size)
    for j in range(zone.history_size):
        x = sample_scenario(sampler, j, stream(zone.seed, Purpose.HISTORY_SCENARIO, j))
        r = raw_flows(zone, x, stream(zone.seed, Purpose.HISTORY_NOISE, j))
        totals[j] = x.values.sum()
        betas[j] = curtailment_for(r)
    return CurtailmentHistory(totals, betas, zone.eta)


def select_beta(history: CurtailmentHistory, x, rng: np.random.Generator) -> float:
    """Uniform draw among betas of historical scenarios whose total is within ``eta``.

    Returns 1 (no curtailment) when no historical total is close enough.
    """
    total = float(_values(x).sum())
    cand = history.betas[np.abs(total - history.totals) < history.eta]
    if cand.size == 0:
        return 1.0
    return float(cand[rng.integers(cand.size)])


def simulate(zone: ZoneConfig, history: CurtailmentHistory, x, rng: np.random.Generator) -> FlowResponse:
    """One non-deterministic simulation: fresh curtailment draw and fresh PTDF noise."""
    beta = select_beta(history, x, rng)
    return FlowResponse(beta * raw_flows(zone, x, rng), beta)


def classify(y) -> bool:
    """True when every relative flow is at most 1 (scenario well handled)."""
    flows = y.flows if isinstance(y, FlowResponse) else np.asarray(y, dtype=float)
    return bool(np.all(flows <= 1.0))


def estimate_p_safe(zone: ZoneConfig, history: CurtailmentHistory, sampler: SamplerConfig,
                    num_simulations: int, first_id: int = 0) -> tuple[float, float]:
    """Brute-force safety probability and its binomial standard error.

    Uses scenario ids ``first_id ..`` and the simulation streams of those ids.
    """
    safe = 0
    for k in range(first_id, first_id + num_simulations):
        x = sample_scenario(sampler, k)
        safe += classify(simulate(zone, history, x, stream(sampler.seed, Purpose.SIMULATION, k)))
    p = safe / num_simulations
    return p, float(np.sqrt(p * (1 - p) / num_simulations))
