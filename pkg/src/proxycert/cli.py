"""Command-line driver: ``certify run | sweep | bench-cdf | make-zone``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from proxycert.certify import run_brute_force, run_proxy_process, write_summary
from proxycert.config import ConfigError, RunConfig, load_run_config
from proxycert.experiments import bench_cdf, sweep_precision, write_bench_csv, write_sweep_csv
from proxycert.netsim import build_history, estimate_p_safe, make_reference_zone, save_zone
from proxycert.sampler import SamplerConfig

logger = logging.getLogger("proxycert")


def _comparison_table(results: dict, reference: float | None) -> str:
    head = f"{'process':<8} {'iterations':>10} {'simulations':>11} {'p_min':>8} {'p_max':>8} {'length':>8}"
    if reference is not None:
        head += f" {'rel.err':>8}"
    lines = [head]
    for name, (ci, log) in results.items():
        line = (f"{name:<8} {len(log):>10} {log.simulations:>11} {ci.p_min:>8.4f} "
                f"{ci.p_max:>8.4f} {ci.length:>8.4f}")
        if reference is not None:
            line += f" {abs(ci.center - reference) / reference:>8.2%}"
        lines.append(line)
    if reference is not None:
        lines.append(f"reference p_safe = {reference:.4f}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg: RunConfig = load_run_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, budget=args.budget, workers=args.workers,
                             output_dir=Path(args.out) if args.out else None)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    history = build_history(cfg.zone, cfg.sampler)
    runners = {"brute": run_brute_force, "proxy": run_proxy_process}
    names = ["brute", "proxy"] if args.process == "both" else [args.process]
    results = {}
    for name in names:
        ci, log = runners[name](cfg, history=history)
        log.to_csv(out / f"{name}_log.csv")
        write_summary(out / f"{name}_summary.json", name, ci, log, cfg.seed)
        results[name] = (ci, log)
        print(f"{name}: [{ci.p_min:.6f}, {ci.p_max:.6f}] at level {1 - ci.alpha:.2f} "
              f"after {len(log)} iterations, {log.simulations} simulations")
    if len(results) > 1:
        print()
        print(_comparison_table(results, cfg.zone.reference_p_safe))
    return 0


def cmd_sweep(args) -> int:
    rows = sweep_precision(args.p, args.precision, args.repeats, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep.csv")
    for r in rows:
        print(", ".join(f"{k}: {v:.2f}" if k != "precision" else f"precision {v:g}" for k, v in r.items()))
    return 0


def cmd_bench_cdf(args) -> int:
    rows = bench_cdf(args.dims, args.repeats, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(rows, out / "bench_cdf.csv")
    for dim, sec in rows:
        print(f"dim {dim:>3}: {sec * 1e3:9.2f} ms")
    return 0


def cmd_make_zone(args) -> int:
    zone = make_reference_zone(seed=args.seed)
    if args.reference_sims:
        sampler = SamplerConfig.default(zone.num_nodes, seed=zone.seed)
        p, se = estimate_p_safe(zone, build_history(zone, sampler), sampler, args.reference_sims)
        zone = replace(zone, reference_p_safe=p)
        print(f"reference p_safe = {p:.6f} (standard error {se:.6f})")
    path = Path(args.out or "zones/reference_5x10.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_zone(zone, path)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certify", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the brute-force and/or proxy certification")
    run.add_argument("--config", required=True, help="run configuration (JSON)")
    run.add_argument("--process", choices=("brute", "proxy", "both"), default="both")
    run.add_argument("--seed", type=int, help="override the configured seed")
    run.add_argument("--budget", type=int, help="override the simulation budget")
    run.add_argument("--workers", type=int, help="override the worker thread count")
    run.add_argument("--out", help="output directory for CSV logs and JSON summaries")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="simulations brute force needs per target precision")
    sweep.add_argument("--p", type=float, nargs="+", default=[0.5, 0.75, 0.95])
    sweep.add_argument("--precision", type=float, nargs="+", default=[0.35, 0.10, 0.05])
    sweep.add_argument("--repeats", type=int, default=100)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", help="output directory (writes sweep.csv)")
    sweep.set_defaults(func=cmd_sweep)

    bench = sub.add_parser("bench-cdf", help="time the safety-probability integral per dimension")
    bench.add_argument("--dims", type=int, nargs="+", default=list(range(5, 100, 5)))
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", help="output directory (writes bench_cdf.csv)")
    bench.set_defaults(func=cmd_bench_cdf)

    zone = sub.add_parser("make-zone", help="regenerate the reference zone from a seed")
    zone.add_argument("--seed", type=int, default=0)
    zone.add_argument("--reference-sims", type=int, default=0,
                      help="brute-force simulations used to freeze reference_p_safe (0 to skip)")
    zone.add_argument("--out", help="zone file to write (default zones/reference_5x10.json)")
    zone.set_defaults(func=cmd_make_zone)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 2
        logger.debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
