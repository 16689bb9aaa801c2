"""Certify the reference zone with a small budget, both ways, from Python.

    python demos/quickstart.py [budget]
"""

import sys
from pathlib import Path

from proxycert import build_history, load_run_config, run_brute_force, run_proxy_process

ROOT = Path(__file__).resolve().parents[1]


def main(budget: int = 2000) -> None:
    cfg = load_run_config(ROOT / "configs" / "reference_run.json").with_overrides(budget=budget)
    history = build_history(cfg.zone, cfg.sampler)
    ref = cfg.zone.reference_p_safe
    print(f"reference p_safe {ref:.4f}, simulation budget {budget}")
    for name, run in (("brute", run_brute_force), ("proxy", run_proxy_process)):
        ci, log = run(cfg, history=history)
        print(f"{name:>5}: {len(log):6d} iterations, {log.simulations:6d} simulations, "
              f"[{ci.p_min:.4f}, {ci.p_max:.4f}], length {ci.length:.4f}, "
              f"contains reference: {ci.contains(ref)}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
