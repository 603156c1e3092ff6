"""Timing comparison between the compiled and pure-Python loop engines.

Run as ``python -m satrl.benchmark``.  Executes a truncated learning run
with each available engine on the same configuration and reports wall
time plus the maximum difference between the final weight vectors.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._engine import ENGINE_NAME, get_engine
from .config import load_preset
from .simulator import run_experiment


def time_engine(cfg, engine, repeats: int):
    best = np.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = run_experiment(cfg, engine=engine)
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m satrl.benchmark",
        description="compare the compiled loop engine against the pure-Python one",
    )
    parser.add_argument("--preset", choices=("case1", "case2"), default="case1")
    parser.add_argument("--t-final", dest="t_final", type=float, default=5.0,
                        help="truncated horizon in seconds (default 5)")
    parser.add_argument("--repeats", type=int, default=1)
    args = parser.parse_args(argv)

    cfg = load_preset(args.preset)
    cfg.sim["t_final"] = args.t_final
    cfg.sim["traj_log_stride"] = 100
    cfg.validate()

    engines = []
    try:
        engines.append(("compiled", get_engine("compiled")))
    except ImportError:
        print("compiled engine unavailable; timing the python engine only")
    engines.append(("python", get_engine("python")))

    print(f"preset={args.preset} horizon={args.t_final}s "
          f"steps={int(round(args.t_final / cfg.h))} default_engine={ENGINE_NAME}")
    results = {}
    for name, engine in engines:
        elapsed, result = time_engine(cfg, engine, args.repeats)
        results[name] = (elapsed, result)
        steps = int(round(args.t_final / cfg.h))
        print(f"{name:>9}: {elapsed:8.3f} s  ({steps / elapsed:,.0f} steps/s)")

    if len(results) == 2:
        w_fast = results["compiled"][1].final_w
        w_ref = results["python"][1].final_w
        diff = float(np.max(np.abs(w_fast - w_ref)))
        speedup = results["python"][0] / results["compiled"][0]
        print(f"speedup: {speedup:.1f}x   max |w_compiled - w_python| = {diff:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
