"""Run configuration: dataclasses plus loading from a validated JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from proxycert.intervals import DecisionThresholds
from proxycert.mgp import KernelParams, LocalityConfig
from proxycert.netsim import ZoneConfig, load_zone
from proxycert.sampler import SamplerConfig, exponential_covariance


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class MGPSettings:
    """Proxy settings. Predictions with fewer than ``min_neighbors`` local
    simulations are never trusted; the scenario is simulated instead."""

    init: KernelParams = KernelParams()
    locality: LocalityConfig = LocalityConfig()
    refit_period: int = 10
    subsample_cap: int = 500
    n_starts: int = 3
    min_neighbors: int = 5

    def __post_init__(self):
        if self.refit_period < 1:
            raise ConfigError("mgp.refit_period", "must be at least 1")
        if self.subsample_cap < 5:
            raise ConfigError("mgp.subsample_cap", "must be at least 5")
        if self.min_neighbors < 0:
            raise ConfigError("mgp.min_neighbors", "must be nonnegative")


@dataclass(frozen=True)
class StopRule:
    """``budget`` stops on the simulation budget alone; ``interval_width`` when
    ``p_max - p_min <= target``; ``relative_precision`` when the half-width over
    ``min(p_hat, 1 - p_hat)`` is at most ``target``. The budget always caps."""

    kind: str = "budget"
    target: float | None = None

    def __post_init__(self):
        if self.kind not in ("budget", "interval_width", "relative_precision"):
            raise ConfigError("stop_rule.kind", f"unknown stop rule {self.kind!r}")
        if self.kind != "budget" and not (self.target and self.target > 0):
            raise ConfigError("stop_rule.target", "a positive target is required")

    def satisfied(self, p_min: float, p_max: float, p_hat: float) -> bool:
        if self.kind == "interval_width":
            return p_max - p_min <= self.target
        if self.kind == "relative_precision":
            rare = min(p_hat, 1.0 - p_hat)
            return rare > 0 and 0.5 * (p_max - p_min) <= self.target * rare
        return False


@dataclass(frozen=True)
class RunConfig:
    zone: ZoneConfig
    sampler: SamplerConfig
    mgp: MGPSettings = MGPSettings()
    thresholds: DecisionThresholds = DecisionThresholds()
    alpha: float = 0.05
    budget: int = 20_000
    m_batch: int = 100
    seed: int = 0
    output_dir: Path = Path("out")
    stop_rule: StopRule = StopRule()
    max_iterations: int | None = None
    workers: int = 1
    record_timing: bool = True
    cdf_accuracy: float = 1e-4
    zone_path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha", f"must lie in (0, 1), got {self.alpha}")
        if self.budget < 1:
            raise ConfigError("budget", "must be at least 1")
        if self.m_batch < 1:
            raise ConfigError("m_batch", "must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.sampler.num_nodes != self.zone.num_nodes:
            raise ConfigError("sampler.node_covariance",
                              f"has {self.sampler.num_nodes} nodes, zone has {self.zone.num_nodes}")

    def with_overrides(self, **changes) -> RunConfig:
        """Copy with the given fields replaced; ``None`` values are ignored."""
        changes = {k: v for k, v in changes.items() if v is not None}
        if "seed" in changes:
            changes["sampler"] = replace(self.sampler, seed=changes["seed"])
        return replace(self, **changes)


def schema() -> dict:
    text = resources.files("proxycert").joinpath("data/run_config.schema.json").read_text()
    return json.loads(text)


def run_config_from_dict(doc: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate ``doc`` against the schema and build a :class:`RunConfig`."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(where, exc.message) from None

    base_dir = Path(base_dir)
    zone_path = base_dir / doc["zone_path"]
    try:
        zone = load_zone(zone_path)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError("zone_path", f"cannot load {zone_path}: {exc}") from None

    seed = int(doc.get("seed", 0))
    s = doc.get("sampler", {})
    cov = s.get("node_covariance")
    if cov is None:
        cov = exponential_covariance(zone.num_nodes, s.get("scale", 0.5), s.get("rho", 0.5))
    try:
        sampler = SamplerConfig(np.asarray(cov, dtype=float), seed, s.get("max_rejections", 100_000))
    except ValueError as exc:
        raise ConfigError("sampler.node_covariance", str(exc)) from None

    g = doc.get("mgp", {})
    init = KernelParams(g.get("sigma0_sq", 0.1), g.get("sigmaf_sq", 0.9), g.get("length_scale", 0.5))
    mgp = MGPSettings(
        init=init,
        locality=LocalityConfig(g.get("max_neighbors", 64), g.get("max_distance", 0.75)),
        refit_period=g.get("refit_period", 10),
        subsample_cap=g.get("subsample_cap", 500),
        min_neighbors=g.get("min_neighbors", 5),
    )
    t = doc.get("thresholds", {})
    try:
        thresholds = DecisionThresholds(t.get("p_inf", 0.01), t.get("p_sup", 0.99))
    except ValueError as exc:
        raise ConfigError("thresholds", str(exc)) from None
    rule = doc.get("stop_rule", {"kind": "budget"})

    return RunConfig(
        zone=zone,
        sampler=sampler,
        mgp=mgp,
        thresholds=thresholds,
        alpha=doc.get("alpha", 0.05),
        budget=doc.get("budget", 20_000),
        m_batch=doc.get("m_batch", 100),
        seed=seed,
        output_dir=Path(doc.get("output_dir", "out")),
        stop_rule=StopRule(rule["kind"], rule.get("target")),
        max_iterations=doc.get("max_iterations"),
        workers=doc.get("workers", 1),
        record_timing=doc.get("record_timing", True),
        cdf_accuracy=doc.get("cdf_accuracy", 1e-4),
        zone_path=str(zone_path),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    return run_config_from_dict(doc, path.parent)
