"""Plot the CSV artifacts written by ``certify``.

    python demos/plot_logs.py OUT_DIR

Reads whichever of ``brute_log.csv``, ``proxy_log.csv``, ``sweep.csv`` and
``bench_cdf.csv`` exist in OUT_DIR and writes PNG files next to them.
Needs matplotlib (``pip install -e .[plots]``).
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from proxycert.certify import IterationLog, moving_average  # noqa: E402


def plot_intervals(logs: dict, out: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, log in logs.items():
        it = np.arange(1, len(log) + 1)
        line, = ax.plot(it, log.column("p_min"), lw=1, label=f"{name} p_min / p_max")
        ax.plot(it, log.column("p_max"), lw=1, color=line.get_color())
    ax.set(xscale="log", xlabel="iteration", ylabel="confidence bounds", ylim=(0.8, 1.0))
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "intervals.png", dpi=120)


def plot_proxy(log: IterationLog, out: Path) -> None:
    it = np.arange(1, len(log) + 1)
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    axes[0].plot(it, moving_average(log.sigma_star, 200))
    axes[0].set(yscale="log", ylabel="sigma* (200-avg)")
    axes[1].plot(it, moving_average(log.entropy, 200))
    axes[1].set(ylabel="entropy (200-avg)")
    axes[2].plot(it, np.asarray(log.n_sims) / it)
    axes[2].set(xlabel="iteration", ylabel="simulated fraction")
    fig.tight_layout()
    fig.savefig(out / "proxy_metrics.png", dpi=120)


def plot_sweep(path: Path, out: Path) -> None:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, label in enumerate(header[1:], start=1):
        ax.plot(100 * data[:, 0], data[:, j], marker="o", label=label)
    ax.set(yscale="log", xlabel="precision (%)", ylabel="simulations")
    ax.invert_xaxis()
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "sweep.png", dpi=120)


def plot_bench(path: Path, out: Path) -> None:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data[:, 0], data[:, 1], marker="o")
    ax.set(xlabel="dimension", ylabel="seconds per evaluation")
    fig.tight_layout()
    fig.savefig(out / "bench_cdf.png", dpi=120)


def main(out: Path) -> None:
    logs = {name: IterationLog.read_csv(out / f"{name}_log.csv")
            for name in ("brute", "proxy") if (out / f"{name}_log.csv").exists()}
    if logs:
        plot_intervals(logs, out)
    if "proxy" in logs:
        plot_proxy(logs["proxy"], out)
    if (out / "sweep.csv").exists():
        plot_sweep(out / "sweep.csv", out)
    if (out / "bench_cdf.csv").exists():
        plot_bench(out / "bench_cdf.csv", out)
    print(f"wrote figures to {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out"))
