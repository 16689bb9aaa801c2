"""Batch experiments: simulation counts needed by brute force, and integration timing."""

from __future__ import annotations

import csv
import time
import warnings

import numpy as np

from proxycert.intervals import quantile, score_bounds
from proxycert.mvncdf import AccuracyNotReached, safe_probability
from proxycert.rng import Purpose, stream

# Level used for the precision sweep; see ``simulations_to_precision``.
SWEEP_ALPHA = 0.01


def simulations_to_precision(p: float, precision: float, repeats: int, rng: np.random.Generator,
                             alpha: float = SWEEP_ALPHA, chunk: int = 4096,
                             max_steps: int = 10_000_000) -> np.ndarray:
    """Number of coin flips each of ``repeats`` brute-force runs needs.

    A run on a ``Bernoulli(p)`` coin stops at the first ``m`` where the score
    interval's half-width is at most ``precision * min(p_hat, 1 - p_hat)``,
    the relative precision on the rarer outcome. Runs are advanced together in
    blocks of ``chunk`` flips.
    """
    if not (0 < p < 1 and precision > 0 and repeats >= 1):
        raise ValueError("need 0 < p < 1, precision > 0 and repeats >= 1")
    z = quantile(alpha)
    counts = np.zeros(repeats, dtype=np.int64)
    successes = np.zeros(repeats)
    active = np.arange(repeats)
    m0 = 0
    while active.size and m0 < max_steps:
        flips = rng.random((active.size, chunk)) < p
        csum = successes[active, None] + np.cumsum(flips, axis=1)
        n = m0 + np.arange(1, chunk + 1)
        p_hat = csum / n
        lo, hi = score_bounds(p_hat, n, 0.0, z)
        rare = np.minimum(p_hat, 1.0 - p_hat)
        ok = (rare > 0) & (0.5 * (hi - lo) <= precision * rare)
        hit = ok.any(axis=1)
        first = np.argmax(ok, axis=1)
        counts[active[hit]] = m0 + first[hit] + 1
        successes[active] = csum[:, -1]
        active = active[~hit]
        m0 += chunk
    if active.size:
        raise RuntimeError(f"{active.size} runs did not reach precision {precision} in {max_steps} flips")
    return counts


def sweep_precision(p_values, precisions, repeats: int = 100, seed: int = 0,
                    alpha: float = SWEEP_ALPHA) -> list[dict]:
    """Mean simulation count per ``(precision, p)``; one row per precision."""
    rows = []
    for j, prec in enumerate(precisions):
        row = {"precision": float(prec)}
        for i, p in enumerate(p_values):
            counts = simulations_to_precision(p, prec, repeats, stream(seed, Purpose.COIN, i, j), alpha)
            row[float(p)] = float(counts.mean())
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("nothing to write")
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["precision"] + [f"p={k!r}" for k in keys[1:]])
        for r in rows:
            out.writerow([repr(r[k]) for k in keys])


def random_instance(dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random mean in ``[0, 0.5]^dim`` and a random correlation matrix."""
    a = rng.normal(size=(dim, dim))
    cov = a @ a.T / dim + 0.1 * np.eye(dim)
    d = 1.0 / np.sqrt(np.diag(cov))
    corr = cov * d[:, None] * d[None, :]
    corr = 0.5 * (corr + corr.T)
    return rng.uniform(0.0, 0.5, size=dim), corr


def bench_cdf(dims, repeats: int = 10, seed: int = 0, accuracy: float = 1e-4) -> list[tuple[int, float]]:
    """Mean wall time of one safety-probability evaluation per dimension."""
    out = []
    for dim in dims:
        if dim < 1:
            raise ValueError("dimensions must be at least 1")
        total = 0.0
        for r in range(repeats):
            rng = stream(seed, Purpose.BENCH, dim, r)
            mean, corr = random_instance(dim, rng)
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AccuracyNotReached)
                safe_probability(mean, 0.25, corr, accuracy=accuracy, rng=rng)
            total += time.perf_counter() - t0
        out.append((int(dim), total / repeats))
    return out


def write_bench_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["dimension", "seconds"])
        for dim, sec in rows:
            out.writerow([dim, repr(sec)])
