"""Experiment configuration: JSON schema, validation and shipped presets.

Presets live as JSON files under ``satrl/presets`` with every numeric
hyperparameter explicit, so the values that the source material leaves open
(actor leakage gain, integration step, initial weights, removal time) are
visible and editable rather than buried in code.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .basis import BasisSet
from .cost import SaturatedCost
from .dynamics import MODEL_REGISTRY, SystemModel, linear_model
from .errors import ConfigError
from .learner import LearnerConfig

log = logging.getLogger(__name__)

PRESET_NAMES = ("case1", "case2")


def _req(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"missing field {ctx}.{key}" if ctx else f"missing field {key}")
    return d[key]


@dataclass
class ExperimentConfig:
    seed: int
    model: dict
    basis_c: list
    basis_a: list
    cost: dict  # Q, r_diag, lambda
    learner: dict  # alpha1, alpha2, y_gain, T, normalization, update_cadence
    exploration: dict  # kind, count, freq_range, scale, t_off
    sim: dict  # h, t_final, x0, x_max, max_resets, reset_box, freeze_after_toff, traj_log_stride
    init: dict = field(default_factory=lambda: {"w0": 0.0})
    uub: dict = field(default_factory=lambda: {"state_bound": 5.0, "weight_drift": 0.5, "window": 10.0})
    pe_window: int = 100
    reference: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        cfg = cls(
            seed=int(_req(d, "seed", "")),
            model=dict(_req(d, "model", "")),
            basis_c=list(_req(d, "basis_c", "")),
            basis_a=list(_req(d, "basis_a", "")),
            cost=dict(_req(d, "cost", "")),
            learner=dict(_req(d, "learner", "")),
            exploration=dict(_req(d, "exploration", "")),
            sim=dict(_req(d, "sim", "")),
            init=dict(d.get("init", {"w0": 0.0})),
            uub=dict(d.get("uub", {"state_bound": 5.0, "weight_drift": 0.5, "window": 10.0})),
            pe_window=int(d.get("pe_window", 100)),
            reference=d.get("reference"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config parse error in {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- builders ---------------------------------------------------------

    def build_model(self) -> SystemModel:
        kind = _req(self.model, "kind", "model")
        if kind == "linear":
            return linear_model(_req(self.model, "A", "model"), _req(self.model, "B", "model"))
        if kind == "registry":
            name = _req(self.model, "name", "model")
            if name not in MODEL_REGISTRY:
                raise ConfigError(
                    f"model.name {name!r} not in registry {sorted(MODEL_REGISTRY)}"
                )
            return MODEL_REGISTRY[name]()
        raise ConfigError(f"model.kind must be 'linear' or 'registry', got {kind!r}")

    def build_bases(self, model: SystemModel):
        return (
            BasisSet(model.n, self.basis_c),
            BasisSet(model.n, self.basis_a),
        )

    def build_cost(self) -> SaturatedCost:
        return SaturatedCost(
            _req(self.cost, "Q", "cost"),
            _req(self.cost, "r_diag", "cost"),
            float(_req(self.cost, "lambda", "cost")),
        )

    def build_learner(self, basis_a: BasisSet, m: int) -> LearnerConfig:
        d_a = basis_a.size * m
        if "y_matrix" in self.learner:
            y = np.asarray(self.learner["y_matrix"], dtype=float)
        else:
            y = float(_req(self.learner, "y_gain", "learner")) * np.eye(d_a)
        cfg = LearnerConfig(
            alpha1=float(_req(self.learner, "alpha1", "learner")),
            alpha2=float(_req(self.learner, "alpha2", "learner")),
            y_matrix=y,
            interval=float(_req(self.learner, "T", "learner")),
            normalization=self.learner.get("normalization", "single"),
            update_cadence=self.learner.get("update_cadence", "per_step"),
        )
        if cfg.alpha1 * self.h >= 2.0:
            log.warning(
                "alpha1 * h = %.3g >= 2: the critic adaptation is stiff relative "
                "to the integrator step (the run loop integrates each critic step "
                "in closed form, so this is stable but strongly damped)",
                cfg.alpha1 * self.h,
            )
        if cfg.alpha2 * self.h >= 2.0:
            log.warning(
                "alpha2 * h = %.3g >= 2: per-step actor updates can overshoot",
                cfg.alpha2 * self.h,
            )
        return cfg

    # -- convenience accessors --------------------------------------------

    @property
    def h(self) -> float:
        return float(_req(self.sim, "h", "sim"))

    @property
    def t_final(self) -> float:
        return float(_req(self.sim, "t_final", "sim"))

    @property
    def t_off(self) -> float:
        return float(_req(self.exploration, "t_off", "exploration"))

    @property
    def interval(self) -> float:
        return float(_req(self.learner, "T", "learner"))

    def validate(self):
        model = self.build_model()
        basis_c, basis_a = self.build_bases(model)
        cost = self.build_cost()
        if cost.n != model.n:
            raise ConfigError("cost.Q dimension does not match the model state")
        if cost.m != model.m:
            raise ConfigError("cost.r_diag length does not match the model input")
        self.build_learner(basis_a, model.m)

        h, t_final = self.h, self.t_final
        if h <= 0:
            raise ConfigError("sim.h must be positive")
        if t_final < 0:
            raise ConfigError("sim.t_final must be non-negative")
        ratio = self.interval / h
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("learner.T must be a positive integer multiple of sim.h")
        if self.t_off < 0:
            raise ConfigError("exploration.t_off must be non-negative")
        x0 = np.asarray(_req(self.sim, "x0", "sim"), dtype=float)
        if x0.shape != (model.n,):
            raise ConfigError("sim.x0 length does not match the model state")
        if float(_req(self.sim, "x_max", "sim")) <= 0:
            raise ConfigError("sim.x_max must be positive")
        box = np.asarray(_req(self.sim, "reset_box", "sim"), dtype=float)
        if box.shape != (model.n, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ConfigError("sim.reset_box must be n rows of [low, high]")
        kind = _req(self.exploration, "kind", "exploration")
        if kind not in ("none", "sum_of_sines", "saturated_probe"):
            raise ConfigError(f"exploration.kind {kind!r} unknown")
        if kind != "none":
            _req(self.exploration, "count", "exploration")
            lo, hi = _req(self.exploration, "freq_range", "exploration")
            if not lo < hi:
                raise ConfigError("exploration.freq_range must satisfy lo < hi")
            _req(self.exploration, "scale", "exploration")
        _req(self.exploration, "t_off", "exploration")
        stride = int(self.sim.get("traj_log_stride", 10))
        if stride < 1:
            raise ConfigError("sim.traj_log_stride must be >= 1")


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    text = resources.files("satrl").joinpath(f"presets/{name}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


def preset_path(name: str) -> str:
    return str(resources.files("satrl").joinpath(f"presets/{name}.json"))
