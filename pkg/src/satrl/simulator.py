"""Full learning runs: exploration synthesis, closed-loop integration,
interval bookkeeping, learner invocation and logging.

The hot loop itself lives in ``satrl._engine`` (compiled kernel with a
pure-Python fallback); this module builds the parameter block, runs it and
post-processes the logs into a RunResult.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .approximator import split_stacked
from .basis import BasisSet
from .config import ExperimentConfig
from .cost import SaturatedCost
from .dynamics import (
    NATIVE_COSINE_GAIN_2D,
    NATIVE_LINEAR,
    SystemModel,
)
from .errors import ConfigError
from ._engine.params import (
    CADENCE_PER_INTERVAL,
    CADENCE_PER_STEP,
    EXPL_NONE,
    EXPL_SATURATED_PROBE,
    EXPL_SUM_OF_SINES,
    MODEL_CALLABLE,
    MODEL_COSINE_GAIN_2D,
    MODEL_LINEAR,
    NORM_DOUBLE,
    NORM_SINGLE,
    LoopParams,
)

_EXPL_KIND = {
    "none": EXPL_NONE,
    "sum_of_sines": EXPL_SUM_OF_SINES,
    "saturated_probe": EXPL_SATURATED_PROBE,
}


@dataclass(frozen=True)
class ExplorationSignal:
    """Bounded exploration input; zero from t_off onward.

    ``sum_of_sines`` adds scale * sum_k sin(omega_k t) directly to the input;
    ``saturated_probe`` composes with the live actor so the total applied
    input is lam * tanh((probe + v2) / lam), strictly inside the bound.
    """

    kind: str
    omegas: np.ndarray  # (m, count)
    scale: float
    t_off: float
    lam: float = math.inf

    def base(self, t: float) -> np.ndarray:
        if t >= self.t_off:
            return np.zeros(self.omegas.shape[0])
        return self.scale * np.sin(self.omegas * t).sum(axis=1)

    def __call__(self, t: float) -> np.ndarray:
        """Exploration value for state-independent kinds."""
        if self.kind == "saturated_probe":
            raise ValueError("saturated probe needs the live actor; use e_value")
        if self.kind == "none":
            return np.zeros(self.omegas.shape[0])
        return self.base(t)

    def e_value(self, t: float, v2, u) -> np.ndarray:
        """Probe exploration given the live pre-/post-saturation actor outputs."""
        if t >= self.t_off:
            return np.zeros_like(np.atleast_1d(u))
        if self.kind != "saturated_probe":
            return self.base(t)
        v2 = np.atleast_1d(v2)
        u = np.atleast_1d(u)
        return self.lam * np.tanh((self.base(t) + v2) / self.lam) - u

    @property
    def amplitude_bound(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "saturated_probe":
            return 2.0 * self.lam
        return abs(self.scale) * self.omegas.shape[1]


def make_sum_of_sines(count, freq_range, seed, m=1, scale=1.0, t_off=math.inf):
    """e(t) = scale * sum_{k=1..count} sin(omega_k t), omega_k ~ U[lo, hi).

    Frequencies are drawn row by row (one row per input channel) from
    ``numpy.random.default_rng(seed)``, so a seed pins the signal exactly.
    """
    lo, hi = freq_range
    if count < 1 or not lo < hi:
        raise ConfigError("exploration needs count >= 1 and freq lo < hi")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    omegas = rng.uniform(lo, hi, size=(m, count))
    return ExplorationSignal(kind="sum_of_sines", omegas=omegas, scale=scale, t_off=t_off)


def make_saturated_probe(base: ExplorationSignal, cost: SaturatedCost, scale=None):
    """Input-constraint-safe probe built on a sum-of-sines carrier."""
    return ExplorationSignal(
        kind="saturated_probe",
        omegas=base.omegas,
        scale=base.scale if scale is None else scale,
        t_off=base.t_off,
        lam=cost.lam,
    )


@dataclass
class RunResult:
    """Logs and summary of one learning run."""

    config: ExperimentConfig
    engine: str
    n_c: int
    n_a: int
    m: int
    bound_t: np.ndarray
    weights_hist: np.ndarray  # (n_bound+1, d_w + d_a); row 0 is t=0
    delta_hist: np.ndarray
    rho_hist: np.ndarray
    valid: np.ndarray
    bellman_abs: np.ndarray  # |E| per boundary, NaN where the interval was dirty
    pe_min_eig: np.ndarray
    traj_t: np.ndarray
    traj_x: np.ndarray
    traj_u: np.ndarray
    traj_e: np.ndarray
    traj_cost: np.ndarray
    reset_times: np.ndarray
    final_x: np.ndarray
    final_w: np.ndarray
    final_wa2: np.ndarray
    summary: dict

    @property
    def d_w(self) -> int:
        return self.n_c + self.n_a * self.m

    def final_weights(self):
        """(stacked critic vector, actor matrix) at t_final."""
        return self.final_w.copy(), self.final_wa2.reshape(self.n_a, self.m)

    # -- artifact writers --------------------------------------------------

    def write_trajectory_csv(self, path):
        n, m = self.traj_x.shape[1], self.m
        header = (
            ["t"]
            + [f"x{i+1}" for i in range(n)]
            + [f"u{j+1}" for j in range(m)]
            + [f"e{j+1}" for j in range(m)]
            + ["running_cost"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.traj_t.shape[0]):
                writer.writerow(
                    [f"{self.traj_t[i]:.6f}"]
                    + [repr(float(v)) for v in self.traj_x[i]]
                    + [repr(float(v)) for v in self.traj_u[i]]
                    + [repr(float(v)) for v in self.traj_e[i]]
                    + [repr(float(self.traj_cost[i]))]
                )

    def write_weights_csv(self, path):
        d_w, d_a = self.d_w, self.n_a * self.m
        header = (
            ["t"]
            + [f"wc{i+1}" for i in range(self.n_c)]
            + [f"wa1_{i+1}" for i in range(d_a)]
            + [f"wa2_{i+1}" for i in range(d_a)]
            + ["abs_bellman", "pe_min_eig"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            times = np.concatenate([[0.0], self.bound_t])
            extras = np.full((times.shape[0], 2), np.nan)
            extras[1:, 0] = self.bellman_abs
            extras[1:, 1] = self.pe_min_eig
            for i, t in enumerate(times):
                writer.writerow(
                    [f"{t:.6f}"]
                    + [repr(float(v)) for v in self.weights_hist[i]]
                    + [repr(float(v)) for v in extras[i]]
                )

    def write_summary(self, txt_path, json_path):
        with open(json_path, "w") as fh:
            json.dump(self.summary, fh, indent=2)
        lines = [f"run summary (engine: {self.engine})", "-" * 40]
        w_c, w_a1 = split_stacked(self.final_w, self.n_c, self.n_a, self.m)
        lines.append("final weights:")
        lines.append(f"  w_c   = {np.array2string(w_c, precision=4)}")
        lines.append(f"  w_a1  = {np.array2string(w_a1.reshape(-1), precision=4)}")
        lines.append(f"  w_a2  = {np.array2string(self.final_wa2, precision=4)}")
        for key, val in self.summary.items():
            if key in ("final_w", "final_wa2"):
                continue
            lines.append(f"{key}: {val}")
        with open(txt_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _pe_trace(delta_hist, window):
    """Windowed minimum eigenvalue of the normalized-regressor Gram matrix."""
    n_b, d = delta_hist.shape
    if n_b == 0:
        return np.empty(0)
    norms = 1.0 + np.einsum("ij,ij->i", delta_hist, delta_hist)
    bar = delta_hist / norms[:, None]
    outers = bar[:, :, None] * bar[:, None, :]
    csum = np.cumsum(outers, axis=0)
    grams = csum.copy()
    grams[window:] -= csum[:-window]
    return np.linalg.eigvalsh(grams)[:, 0]


def build_loop_params(
    model: SystemModel,
    basis_c: BasisSet,
    basis_a: BasisSet,
    cost: SaturatedCost,
    learner_cfg,
    exploration: ExplorationSignal,
    h: float,
    t_final: float,
    x0,
    x_max: float,
    max_resets: int,
    reset_draw,
    w0,
    wa2_0,
    traj_stride: int = 10,
    freeze_after_toff: bool = True,
) -> LoopParams:
    if model.native_id == NATIVE_LINEAR:
        kind = MODEL_LINEAR
        a_mat, b_mat = model.linear
    elif model.native_id == NATIVE_COSINE_GAIN_2D:
        kind = MODEL_COSINE_GAIN_2D
        a_mat = np.zeros((model.n, model.n))
        b_mat = np.zeros((model.n, model.m))
    else:
        kind = MODEL_CALLABLE
        a_mat = np.zeros((model.n, model.n))
        b_mat = np.zeros((model.n, model.m))
    spi = int(round(learner_cfg.interval / h))
    if abs(spi * h - learner_cfg.interval) > 1e-9 * max(1.0, learner_cfg.interval):
        raise ConfigError("learner.T must be an integer multiple of sim.h")
    return LoopParams(
        n=model.n,
        m=model.m,
        expo_c=basis_c.exponents,
        expo_a=basis_a.exponents,
        model_kind=kind,
        a_matrix=np.asarray(a_mat, dtype=float),
        b_matrix=np.asarray(b_mat, dtype=float),
        drift=model.drift,
        input_gain=model.input_gain,
        q_matrix=cost.q_matrix,
        r_diag=cost.r_diag,
        lam=cost.lam,
        expl_kind=_EXPL_KIND[exploration.kind],
        omegas=exploration.omegas,
        expl_scale=exploration.scale,
        t_off=exploration.t_off,
        alpha1=learner_cfg.alpha1,
        alpha2=learner_cfg.alpha2,
        y_matrix=learner_cfg.y_matrix,
        normalization=NORM_DOUBLE if learner_cfg.normalization == "double" else NORM_SINGLE,
        cadence=(
            CADENCE_PER_INTERVAL
            if learner_cfg.update_cadence == "per_interval"
            else CADENCE_PER_STEP
        ),
        freeze_after_toff=freeze_after_toff,
        h=h,
        n_steps=int(round(t_final / h)),
        steps_per_interval=spi,
        x0=np.asarray(x0, dtype=float),
        x_max=x_max,
        max_resets=max_resets,
        reset_draw=reset_draw,
        w0=np.asarray(w0, dtype=float),
        wa2_0=np.asarray(wa2_0, dtype=float),
        traj_stride=traj_stride,
    )


def run_experiment(cfg: ExperimentConfig, engine=None) -> RunResult:
    """Execute one full learning run described by the config.

    All randomness flows from cfg.seed through one generator, consumed in a
    fixed order: exploration frequencies first, then initial weights, then
    divergence-reset redraws as they occur.
    """
    cfg.validate()
    engine_mod = _engine.get_engine(engine) if isinstance(engine, str) else engine
    if engine_mod is None:
        engine_mod = _engine._engine
    engine_name = "compiled" if engine_mod.__name__.endswith("_core") else "python"

    model = cfg.build_model()
    basis_c, basis_a = cfg.build_bases(model)
    cost = cfg.build_cost()
    learner_cfg = cfg.build_learner(basis_a, model.m)

    rng = np.random.default_rng(cfg.seed)
    expl_cfg = cfg.exploration
    if expl_cfg["kind"] == "none":
        exploration = ExplorationSignal(
            kind="none", omegas=np.zeros((model.m, 1)), scale=0.0, t_off=cfg.t_off
        )
    else:
        carrier = make_sum_of_sines(
            int(expl_cfg["count"]),
            expl_cfg["freq_range"],
            rng,
            m=model.m,
            scale=float(expl_cfg["scale"]),
            t_off=cfg.t_off,
        )
        if expl_cfg["kind"] == "saturated_probe":
            exploration = make_saturated_probe(carrier, cost)
        else:
            exploration = carrier

    d_a = basis_a.size * model.m
    w0_bound = float(cfg.init.get("w0", 0.0))
    if w0_bound > 0:
        w_c0 = rng.uniform(-w0_bound, w0_bound, basis_c.size)
        w_a0 = rng.uniform(-w0_bound, w0_bound, d_a)
    else:
        w_c0 = np.zeros(basis_c.size)
        w_a0 = np.zeros(d_a)
    # w_a1 and w_a2 start identical (their separate roles emerge from the laws)
    w0 = np.concatenate([w_c0, w_a0])
    wa2_0 = w_a0.copy()

    box = np.asarray(cfg.sim["reset_box"], dtype=float)

    def reset_draw():
        return rng.uniform(box[:, 0], box[:, 1])

    params = build_loop_params(
        model,
        basis_c,
        basis_a,
        cost,
        learner_cfg,
        exploration,
        h=cfg.h,
        t_final=cfg.t_final,
        x0=cfg.sim["x0"],
        x_max=float(cfg.sim["x_max"]),
        max_resets=int(cfg.sim["max_resets"]),
        reset_draw=reset_draw,
        w0=w0,
        wa2_0=wa2_0,
        traj_stride=int(cfg.sim.get("traj_log_stride", 10)),
        freeze_after_toff=bool(cfg.sim.get("freeze_after_toff", True)),
    )
    out = engine_mod.run_loop(params)

    d_w = basis_c.size + d_a
    n_bound = out["bound_t"].shape[0]
    bellman_abs = np.full(n_bound, np.nan)
    for b in range(n_bound):
        if out["valid"][b]:
            bellman_abs[b] = abs(
                out["weights_hist"][b + 1, :d_w] @ out["delta_hist"][b]
                + out["rho_hist"][b]
            )
    pe_min_eig = _pe_trace(out["delta_hist"], cfg.pe_window)

    summary = _summarize(cfg, out, bellman_abs, pe_min_eig, engine_name)
    return RunResult(
        config=cfg,
        engine=engine_name,
        n_c=basis_c.size,
        n_a=basis_a.size,
        m=model.m,
        bound_t=out["bound_t"],
        weights_hist=out["weights_hist"],
        delta_hist=out["delta_hist"],
        rho_hist=out["rho_hist"],
        valid=out["valid"],
        bellman_abs=bellman_abs,
        pe_min_eig=pe_min_eig,
        traj_t=out["traj_t"],
        traj_x=out["traj_x"],
        traj_u=out["traj_u"],
        traj_e=out["traj_e"],
        traj_cost=out["traj_cost"],
        reset_times=out["reset_times"],
        final_x=out["final_x"],
        final_w=out["final_w"],
        final_wa2=out["final_wa2"],
        summary=summary,
    )


def _summarize(cfg, out, bellman_abs, pe_min_eig, engine_name):
    window = float(cfg.uub.get("window", 10.0))
    t_final = cfg.t_final
    tail_traj = out["traj_t"] >= t_final - window
    state_norms = np.linalg.norm(out["traj_x"], axis=1)
    tail_bell = out["bound_t"] >= t_final - window
    tail_vals = bellman_abs[tail_bell]
    deltas = out["delta_hist"][tail_bell]
    ms = 1.0 + np.einsum("ij,ij->i", deltas, deltas)
    normalized = tail_vals / ms

    summary = {
        "engine": engine_name,
        "seed": cfg.seed,
        "t_final": t_final,
        "resets": int(out["reset_times"].shape[0]),
        "final_w": out["final_w"].tolist(),
        "final_wa2": out["final_wa2"].tolist(),
        "final_state": out["final_x"].tolist(),
        "trailing_window_s": window,
        "trailing_mean_abs_bellman": _nanmean(tail_vals),
        "trailing_max_abs_bellman": _nanmax(tail_vals),
        "trailing_mean_normalized_bellman": _nanmean(normalized),
        "trailing_max_state_norm": float(np.max(state_norms[tail_traj]))
        if np.any(tail_traj)
        else float("nan"),
        "pe_min_eig_final": float(pe_min_eig[-1]) if pe_min_eig.size else float("nan"),
    }
    if cfg.reference is not None:
        ref = np.asarray(cfg.reference, dtype=float)
        if ref.shape == out["final_w"].shape:
            err = out["final_w"] - ref
            summary["reference_error"] = err.tolist()
            summary["reference_error_max_abs"] = float(np.max(np.abs(err)))
    return summary


def _nanmean(arr):
    arr = arr[np.isfinite(arr)]
    return float(arr.mean()) if arr.size else float("nan")


def _nanmax(arr):
    arr = arr[np.isfinite(arr)]
    return float(arr.max()) if arr.size else float("nan")


def simulate_policy(model, basis_c, basis_a, cost, w_stacked, wa2, x0, horizon, h=1e-3):
    """Closed-loop rollout of a frozen policy; returns trajectory and total cost.

    Reuses the run loop with learning frozen and exploration off, so the
    integrator (and its quadrature of the running cost) is the same one used
    during learning.
    """
    from .learner import LearnerConfig

    d_a = basis_a.size * model.m
    # one interval per step so the summed rho covers the whole horizon exactly
    learner_cfg = LearnerConfig(alpha1=1.0, alpha2=1.0, y_matrix=np.eye(d_a), interval=h)
    exploration = ExplorationSignal(
        kind="none", omegas=np.zeros((model.m, 1)), scale=0.0, t_off=0.0
    )
    params = build_loop_params(
        model,
        basis_c,
        basis_a,
        cost,
        learner_cfg,
        exploration,
        h=h,
        t_final=horizon,
        x0=x0,
        x_max=1e12,
        max_resets=0,
        reset_draw=lambda: np.zeros(model.n),
        w0=w_stacked,
        wa2_0=np.asarray(wa2, dtype=float).reshape(-1),
        traj_stride=1,
        freeze_after_toff=True,  # t_off = 0: frozen from the start
    )
    out = _engine.run_loop(params)
    return {
        "t": out["traj_t"],
        "x": out["traj_x"],
        "u": out["traj_u"],
        "total_cost": float(out["rho_hist"].sum()),
        "final_x": out["final_x"],
    }


def replay_metrics(result: RunResult, reference=None, horizon=10.0, x0_grid=None):
    """Post-run summary: trailing residuals, weight error, closed-loop costs.

    ``reference`` is an optional stacked weight vector (e.g. the ARE oracle);
    ``x0_grid`` an iterable of initial states for finite-horizon cost replays
    of the learned final policy.
    """
    cfg = result.config
    window = float(cfg.uub.get("window", 10.0))
    tail = result.bound_t >= cfg.t_final - window
    tail_vals = result.bellman_abs[tail]
    metrics = {
        "trailing_mean_abs_bellman": _nanmean(tail_vals),
        "trailing_max_abs_bellman": _nanmax(tail_vals),
        "sufficient_data": bool(np.any(np.isfinite(tail_vals))),
    }
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        if ref.shape != result.final_w.shape:
            raise ConfigError(
                f"reference length {ref.shape[0]} != weight length {result.final_w.shape[0]}"
            )
        err = result.final_w - ref
        metrics["weight_error"] = err.tolist()
        metrics["weight_error_max_abs"] = float(np.max(np.abs(err)))
    if x0_grid is not None:
        model = cfg.build_model()
        basis_c, basis_a = cfg.build_bases(model)
        cost = cfg.build_cost()
        costs = []
        for x0 in x0_grid:
            roll = simulate_policy(
                model, basis_c, basis_a, cost,
                result.final_w, result.final_wa2, x0, horizon, h=cfg.h,
            )
            costs.append(roll["total_cost"])
        metrics["replay_costs"] = costs
    return metrics
