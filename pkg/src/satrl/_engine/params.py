"""Plain-array parameter block consumed by both run-loop engines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# model kinds
MODEL_LINEAR = 0
MODEL_CALLABLE = 1
MODEL_COSINE_GAIN_2D = 2

# exploration kinds
EXPL_NONE = 0
EXPL_SUM_OF_SINES = 1
EXPL_SATURATED_PROBE = 2

# cadence / normalization switches
CADENCE_PER_STEP = 0
CADENCE_PER_INTERVAL = 1
NORM_SINGLE = 0
NORM_DOUBLE = 1


@dataclass
class LoopParams:
    # dimensions
    n: int
    m: int
    # bases (integer exponent tables)
    expo_c: np.ndarray  # (N_c, n)
    expo_a: np.ndarray  # (N_a, n)
    # model
    model_kind: int
    a_matrix: np.ndarray  # (n, n), zeros unless linear
    b_matrix: np.ndarray  # (n, m), zeros unless linear
    drift: Optional[Callable]
    input_gain: Optional[Callable]
    # cost
    q_matrix: np.ndarray
    r_diag: np.ndarray
    lam: float
    # exploration
    expl_kind: int
    omegas: np.ndarray  # (m, K)
    expl_scale: float
    t_off: float
    # learner
    alpha1: float
    alpha2: float
    y_matrix: np.ndarray  # (N_a*m, N_a*m)
    normalization: int
    cadence: int
    freeze_after_toff: bool
    # integration
    h: float
    n_steps: int
    steps_per_interval: int
    x0: np.ndarray
    x_max: float
    max_resets: int
    reset_draw: Optional[Callable]  # () -> state sample in the admissible box
    # initial weights
    w0: np.ndarray  # stacked critic vector, length N_c + N_a*m
    wa2_0: np.ndarray  # flattened actor weights, length N_a*m
    # logging
    traj_stride: int
