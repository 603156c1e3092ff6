"""Command-line harness: run / oracle / compare / sweep.

Exit codes: 0 success, 1 comparison failure, 2 config error, 3 divergence,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .basis import BasisSet
from .config import ExperimentConfig, load_preset
from .errors import ConfigError, NumericError, OracleError, SimulationDiverged
from .lqr_oracle import LinearPlant, lqr_gain, lqr_reference_weights, solve_are
from .simulator import run_experiment

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NUMERIC = 4


def _load_config(args) -> ExperimentConfig:
    if args.preset:
        cfg = load_preset(args.preset)
    elif args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        raise ConfigError("either --preset or --config is required")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "t_final", None) is not None:
        cfg.sim["t_final"] = args.t_final
    if getattr(args, "no_freeze", False):
        cfg.sim["freeze_after_toff"] = False
    if getattr(args, "normalization", None):
        cfg.learner["normalization"] = args.normalization
    if getattr(args, "cadence", None):
        cfg.learner["update_cadence"] = args.cadence
    cfg.validate()
    return cfg


def _write_run(result, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    result.write_trajectory_csv(out_dir / "trajectory.csv")
    result.write_weights_csv(out_dir / "weights.csv")
    result.write_summary(out_dir / "summary.txt", out_dir / "summary.json")
    with open(out_dir / "config.json", "w") as fh:
        json.dump(result.config.to_dict(), fh, indent=2)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_experiment(cfg)
    _write_run(result, Path(args.out))
    print(f"run complete: engine={result.engine} resets={len(result.reset_times)}")
    w_c = result.final_w[: result.n_c]
    print(f"final w_c  = {np.array2string(w_c, precision=4)}")
    print(f"final w_a1 = {np.array2string(result.final_w[result.n_c:], precision=4)}")
    print(f"final w_a2 = {np.array2string(result.final_wa2, precision=4)}")
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def _plant_from_args(args) -> LinearPlant:
    if args.preset:
        cfg = load_preset(args.preset)
        if cfg.model.get("kind") != "linear":
            raise ConfigError(f"preset {args.preset} is not a linear plant")
        q = np.asarray(cfg.cost["Q"], dtype=float)
        r = np.diag(cfg.cost["r_diag"])
        return LinearPlant(a=cfg.model["A"], b=cfg.model["B"], q=q, r=r)
    if not args.plant:
        raise ConfigError("either --preset or --plant is required")
    with open(args.plant) as fh:
        spec = json.load(fh)
    for key in ("A", "B", "Q", "R"):
        if key not in spec:
            raise ConfigError(f"missing field {key} in plant spec")
    return LinearPlant(a=spec["A"], b=spec["B"], q=spec["Q"], r=spec["R"])


def cmd_oracle(args) -> int:
    plant = _plant_from_args(args)
    p = solve_are(plant)
    print("P =")
    for row in p:
        print("  [" + ", ".join(f"{v:.4f}" for v in row) + "]")
    print("K = R^-1 B^T P =")
    for row in lqr_gain(plant, p):
        print("  [" + ", ".join(f"{v:.4f}" for v in row) + "]")
    if args.preset:
        cfg = load_preset(args.preset)
        basis_c = BasisSet(plant.n, cfg.basis_c)
        basis_a = BasisSet(plant.n, cfg.basis_a)
        w_star = lqr_reference_weights(plant, basis_c, basis_a, p)
        print("W* = [" + ", ".join(f"{v:.4f}" for v in w_star) + "]")
    return EXIT_OK


def _reference_for_compare(args, run_dir: Path):
    if args.reference == "oracle":
        with open(run_dir / "config.json") as fh:
            cfg = ExperimentConfig.from_dict(json.load(fh))
        if cfg.model.get("kind") != "linear":
            raise ConfigError("oracle reference requires a linear plant")
        plant = LinearPlant(
            a=cfg.model["A"],
            b=cfg.model["B"],
            q=np.asarray(cfg.cost["Q"], dtype=float),
            r=np.diag(cfg.cost["r_diag"]),
        )
        basis_c = BasisSet(plant.n, cfg.basis_c)
        basis_a = BasisSet(plant.n, cfg.basis_a)
        return lqr_reference_weights(plant, basis_c, basis_a)
    ref_path = Path(args.reference)
    if not ref_path.exists():
        raise ConfigError(f"reference file {ref_path} not found")
    if ref_path.suffix == ".json":
        with open(ref_path) as fh:
            data = json.load(fh)
        return np.asarray(data["final_w"] if isinstance(data, dict) else data, dtype=float)
    return np.loadtxt(ref_path, delimiter=",")


def cmd_compare(args) -> int:
    run_dir = Path(args.run)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"run artifacts not found in {run_dir}")
    with open(summary_path) as fh:
        summary = json.load(fh)
    final_w = np.asarray(summary["final_w"], dtype=float)
    ref = np.asarray(_reference_for_compare(args, run_dir), dtype=float)
    if ref.shape != final_w.shape:
        raise ConfigError(
            f"reference length {ref.shape[0]} does not match weights length {final_w.shape[0]}"
        )
    err = final_w - ref
    print(f"{'idx':>4} {'learned':>12} {'reference':>12} {'error':>12}")
    for i, (w, r, e) in enumerate(zip(final_w, ref, err)):
        print(f"{i:>4} {w:>12.4f} {r:>12.4f} {e:>12.4f}")
    max_err = float(np.max(np.abs(err)))
    ok = max_err <= args.tol
    print(f"max |error| = {max_err:.4f} (tol {args.tol:g}) -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _sweep_one(payload):
    cfg_dict, seed, out_dir = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    cfg.seed = seed
    result = run_experiment(cfg)
    _write_run(result, Path(out_dir))
    return seed, result.summary.get("trailing_mean_abs_bellman")


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out_root = Path(args.out)
    jobs = [
        (cfg.to_dict(), seed, str(out_root / f"seed{seed}")) for seed in args.seeds
    ]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for seed, resid in pool.map(_sweep_one, jobs):
            print(f"seed {seed}: trailing mean |E| = {resid}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satrl",
        description="learn saturated near-optimal controllers from simulated online data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one learning run")
    run_p.add_argument("--preset", choices=("case1", "case2"))
    run_p.add_argument("--config", help="path to a config JSON file")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--t-final", dest="t_final", type=float)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--no-freeze", action="store_true",
                       help="keep adapting after the exploration signal is removed")
    run_p.add_argument("--normalization", choices=("single", "double"))
    run_p.add_argument("--cadence", choices=("per_step", "per_interval"))
    run_p.set_defaults(func=cmd_run)

    oracle_p = sub.add_parser("oracle", help="print the Riccati solution and reference weights")
    oracle_p.add_argument("--preset", choices=("case1",))
    oracle_p.add_argument("--plant", help="JSON file with A, B, Q, R")
    oracle_p.set_defaults(func=cmd_oracle)

    cmp_p = sub.add_parser("compare", help="compare run weights against a reference")
    cmp_p.add_argument("--run", required=True, help="run output directory")
    cmp_p.add_argument("--reference", default="oracle",
                       help="'oracle' or a JSON/CSV file with reference weights")
    cmp_p.add_argument("--tol", type=float, default=0.05)
    cmp_p.set_defaults(func=cmd_compare)

    sweep_p = sub.add_parser("sweep", help="run several seeds in parallel")
    sweep_p.add_argument("--preset", choices=("case1", "case2"))
    sweep_p.add_argument("--config")
    sweep_p.add_argument("--t-final", dest="t_final", type=float)
    sweep_p.add_argument("--seeds", type=int, nargs="+", required=True)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--jobs", type=int, default=None)
    sweep_p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
