"""Model-free actor-critic learning of nearly optimal saturated controllers.

Learns constrained-input feedback laws for input-affine plants from
simulated online data (integral temporal differences with an injected
exploration signal) and validates the linear case against an algebraic
Riccati ground truth.
"""

from ._engine import ENGINE_NAME
from .basis import BasisSet
from .config import ExperimentConfig, load_preset
from .cost import SaturatedCost
from .dynamics import SystemModel, cosine_gain_2d, linear_model
from .learner import LearnerConfig, RegressorSample
from .lqr_oracle import LinearPlant, lqr_reference_weights, solve_are
from .simulator import (
    ExplorationSignal,
    RunResult,
    make_saturated_probe,
    make_sum_of_sines,
    replay_metrics,
    run_experiment,
    simulate_policy,
)

__version__ = "0.1.0"

__all__ = [
    "ENGINE_NAME",
    "BasisSet",
    "ExperimentConfig",
    "ExplorationSignal",
    "LearnerConfig",
    "LinearPlant",
    "RegressorSample",
    "RunResult",
    "SaturatedCost",
    "SystemModel",
    "cosine_gain_2d",
    "linear_model",
    "load_preset",
    "lqr_reference_weights",
    "make_saturated_probe",
    "make_sum_of_sines",
    "replay_metrics",
    "run_experiment",
    "simulate_policy",
    "solve_are",
]
