"""Brute-force and proxy-based certification of the safety probability.

Both processes draw scenario ``k`` and simulate it from streams keyed by
``(seed, purpose, namespace, k)``. Results therefore depend only on the
configuration, never on the number of worker threads. The brute-force and
proxy runs use different namespaces, so they see independent scenarios.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from proxycert.config import RunConfig
from proxycert.intervals import (ConfidenceInterval, DegenerateWeights, OutcomeRecord,
                                 classic_interval, clt_summary, draw_prediction, quantile,
                                 running_bounds, score_bounds, uncertainty_interval)
from proxycert.mgp import MGPProxy, local_subset, omega_from_zone, posterior
from proxycert.mvncdf import prediction_entropy, rectangle_probability
from proxycert.netsim import CurtailmentHistory, build_history, classify, simulate
from proxycert.rng import Purpose, stream
from proxycert.sampler import sample_scenario

BRUTE_NAMESPACE = 0
PROXY_NAMESPACE = 1

LOG_COLUMNS = ("scenario_id", "p_pred", "sigma_star", "entropy", "simulated",
               "p_min", "p_max", "n_sims", "elapsed_s")


@dataclass
class IterationLog:
    """One row per scenario, appended in scenario order.

    ``p_pred``, ``sigma_star`` and ``entropy`` are NaN for the brute-force
    process; ``p_min``/``p_max`` are NaN while the interval is undefined.
    Missing values are written as empty CSV cells.
    """

    scenario_id: list = field(default_factory=list)
    p_pred: list = field(default_factory=list)
    sigma_star: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    simulated: list = field(default_factory=list)
    p_min: list = field(default_factory=list)
    p_max: list = field(default_factory=list)
    n_sims: list = field(default_factory=list)
    elapsed_s: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scenario_id)

    def append(self, **row) -> None:
        for name in LOG_COLUMNS:
            getattr(self, name).append(row[name])

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def simulations(self) -> int:
        return int(self.n_sims[-1]) if self.n_sims else 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(LOG_COLUMNS)
            for i in range(len(self)):
                out.writerow([_cell(getattr(self, name)[i]) for name in LOG_COLUMNS])

    @classmethod
    def read_csv(cls, path) -> IterationLog:
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != LOG_COLUMNS:
                raise ValueError(f"unexpected header {header}")
            for row in reader:
                cells = dict(zip(LOG_COLUMNS, row))
                log.append(
                    scenario_id=int(cells["scenario_id"]),
                    simulated=cells["simulated"] == "1",
                    n_sims=int(cells["n_sims"]),
                    **{k: float(cells[k]) if cells[k] else math.nan
                       for k in ("p_pred", "sigma_star", "entropy", "p_min", "p_max", "elapsed_s")},
                )
        return log


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` entries; early entries average what exists."""
    if window < 1:
        raise ValueError("window must be at least 1")
    x = np.asarray(series, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def write_summary(path, process: str, interval: ConfidenceInterval, log: IterationLog, seed: int) -> dict:
    doc = {
        "process": process,
        "p_min": interval.p_min,
        "p_max": interval.p_max,
        "iterations": len(log),
        "simulations": log.simulations,
        "alpha": interval.alpha,
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.start = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self.start if self.enabled else 0.0


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _history(cfg: RunConfig, history: CurtailmentHistory | None) -> CurtailmentHistory:
    return build_history(cfg.zone, cfg.sampler) if history is None else history


def _simulate_one(cfg: RunConfig, history: CurtailmentHistory, ns: int, k: int):
    x = sample_scenario(cfg.sampler, k, stream(cfg.seed, Purpose.SCENARIO, ns, k))
    response = simulate(cfg.zone, history, x, stream(cfg.seed, Purpose.SIMULATION, ns, k))
    return x, response


def run_brute_force(cfg: RunConfig, namespace: int = BRUTE_NAMESPACE,
                    history: CurtailmentHistory | None = None) -> tuple[ConfidenceInterval, IterationLog]:
    """Simulate every scenario and track the score interval after each one.

    Stops at the simulation budget, at ``max_iterations`` or when the stop
    rule holds, whichever comes first.
    """
    history = _history(cfg, history)
    limit = cfg.budget if cfg.max_iterations is None else min(cfg.budget, cfg.max_iterations)
    z = quantile(cfg.alpha)
    clock = _Clock(cfg.record_timing)
    log = IterationLog()
    safe_total = 0
    chunk = max(cfg.m_batch, 1)
    k = 0
    done = False
    while k < limit and not done:
        ids = range(k, min(k + chunk, limit))
        outcomes = _pool_map(lambda i: classify(_simulate_one(cfg, history, namespace, i)[1]),
                             ids, cfg.workers)
        w = np.asarray(outcomes, dtype=float)
        n = np.arange(k + 1, k + 1 + w.size)
        csum = safe_total + np.cumsum(w)
        lo, hi = score_bounds(csum / n, n, 0.0, z)
        stop = len(ids)
        for j in range(len(ids)):
            if cfg.stop_rule.satisfied(lo[j], hi[j], csum[j] / n[j]):
                stop, done = j + 1, True
                break
        elapsed = clock()
        for j in range(stop):
            log.append(scenario_id=ids[j], p_pred=math.nan, sigma_star=math.nan, entropy=math.nan,
                       simulated=True, p_min=float(lo[j]), p_max=float(hi[j]), n_sims=int(n[j]),
                       elapsed_s=elapsed)
        safe_total = int(csum[stop - 1])
        k += stop
    outcomes = np.zeros(k)
    outcomes[:safe_total] = 1.0  # the interval depends on the count only
    return classic_interval(outcomes, cfg.alpha), log


@dataclass(frozen=True)
class _Prediction:
    scenario_id: int
    x: object
    p: float
    sigma_star: float
    record: OutcomeRecord | None


def _predict_one(cfg: RunConfig, proxy: MGPProxy, snapshot, ns: int, k: int) -> _Prediction:
    x = sample_scenario(cfg.sampler, k, stream(cfg.seed, Purpose.SCENARIO, ns, k))
    X, Y, ids = snapshot
    local = local_subset(X, ids, x, proxy.locality)
    post = posterior(X[local], Y[local], x, proxy.params, proxy.omega)
    # A prediction backed by few nearby simulations leans on the prior and is
    # poorly calibrated: always simulate those.
    informed = local.size >= cfg.mgp.min_neighbors
    th = cfg.thresholds
    rng = stream(cfg.seed, Purpose.PREDICTION, ns, k)
    if post.sigma_star == 0.0:
        p = float(np.all(post.mu_star <= 1.0))
    else:
        def settled(est, err):
            # Clearly inside the gray zone: the exact value no longer matters.
            return not informed or (est - err > th.p_inf and est + err < th.p_sup)

        p, _, _ = rectangle_probability(post.mu_star, post.covariance, 1.0, rng,
                                        accuracy=cfg.cdf_accuracy, stop_if=settled)
    record = draw_prediction(p, th, rng, k) if informed else None
    return _Prediction(k, x, p, post.sigma_star, record)


def run_proxy_process(cfg: RunConfig, namespace: int = PROXY_NAMESPACE,
                      history: CurtailmentHistory | None = None) -> tuple[ConfidenceInterval, IterationLog]:
    """Batched proxy loop: predict, keep confident predictions, simulate the rest.

    Predictions inside a batch all use the training set as it stood at the
    start of the batch. Simulated pairs join the training set and the kernel
    parameters are refit at the end of every ``K``-th batch. Only simulations
    count against the budget; the run ends when the next simulation would
    exceed it, at ``max_iterations``, or when the stop rule holds at the end
    of a batch.
    """
    history = _history(cfg, history)
    omega = omega_from_zone(cfg.zone)
    proxy = MGPProxy(cfg.mgp.init, omega, cfg.mgp.locality, cfg.zone.num_nodes)
    clock = _Clock(cfg.record_timing)
    log = IterationLog()
    w_all: list[float] = []
    q_all: list[float] = []
    sims = 0
    k = 0
    batch = 0
    exhausted = False
    while not exhausted:
        stop_at = k + cfg.m_batch
        if cfg.max_iterations is not None:
            stop_at = min(stop_at, cfg.max_iterations)
        ids = list(range(k, stop_at))
        if not ids:
            break
        snapshot = proxy.train.snapshot()
        preds = _pool_map(lambda i: _predict_one(cfg, proxy, snapshot, namespace, i), ids, cfg.workers)

        # Serial budget gate, in scenario order.
        kept = []
        for pr in preds:
            if pr.record is None:
                if sims + sum(1 for c in kept if c.record is None) >= cfg.budget:
                    exhausted = True
                    break
            kept.append(pr)
        to_simulate = [pr for pr in kept if pr.record is None]
        responses = _pool_map(
            lambda pr: simulate(cfg.zone, history, pr.x,
                                stream(cfg.seed, Purpose.SIMULATION, namespace, pr.scenario_id)),
            to_simulate, cfg.workers)
        simulated = dict(zip((pr.scenario_id for pr in to_simulate), responses))

        first_row = len(w_all)
        for pr in kept:
            if pr.record is None:
                y = simulated[pr.scenario_id]
                proxy.train.add(pr.x.values, y.flows, pr.scenario_id)
                w_all.append(float(classify(y)))
                q_all.append(1.0)
            else:
                w_all.append(float(pr.record.w))
                q_all.append(pr.record.q)
        if kept:
            with np.errstate(divide="ignore", invalid="ignore"):
                lo, hi = running_bounds(w_all, q_all, cfg.alpha)
            elapsed = clock()
            for j, pr in enumerate(kept):
                row = first_row + j
                if pr.record is None:
                    sims += 1
                log.append(scenario_id=pr.scenario_id, p_pred=pr.p, sigma_star=pr.sigma_star,
                           entropy=prediction_entropy(pr.p), simulated=pr.record is None,
                           p_min=float(lo[row]), p_max=float(hi[row]), n_sims=sims, elapsed_s=elapsed)
        k += len(kept)

        if (batch + 1) % cfg.mgp.refit_period == 0 and len(proxy.train) >= 5:
            proxy.refit(stream(cfg.seed, Purpose.FIT, namespace, batch), cfg.mgp.subsample_cap,
                        cfg.mgp.n_starts)
        batch += 1
        if cfg.max_iterations is not None and k >= cfg.max_iterations:
            break
        if sims >= cfg.budget:
            exhausted = True
        if log and not math.isnan(log.p_min[-1]):
            summary = clt_summary(w=w_all, q=q_all)
            if cfg.stop_rule.satisfied(log.p_min[-1], log.p_max[-1], summary.z_bar):
                break

    if not w_all:
        raise DegenerateWeights("no records were produced")
    interval = uncertainty_interval(clt_summary(w=w_all, q=q_all), cfg.alpha)
    return interval, log

