"""Input-affine plant models and the fixed-step closed-loop integrator.

The integrator advances an augmented state (x, rho_acc, kron_acc) with one
classical RK4 pass: rho_acc carries the integral reinforcement
d(rho)/dt = Q(x) + U(u(x)) and kron_acc carries the exploration cross term
d(kron)/dt = 2 * kron(phi_a(x), R e(t)).  Carrying both as ODE states keeps
the quadrature at integrator order instead of a post-hoc trapezoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .approximator import flatten
from .errors import ConfigError, NumericError

# native_id values understood by the compiled kernel
NATIVE_NONE = 0
NATIVE_LINEAR = 1
NATIVE_COSINE_GAIN_2D = 2


@dataclass(frozen=True)
class SystemModel:
    """Input-affine plant xdot = f(x) + g(x) u."""

    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_gain: Callable[[np.ndarray], np.ndarray]
    # (A, B) when the plant is linear; lets the compiled kernel skip callbacks
    linear: Optional[tuple] = None
    native_id: int = NATIVE_NONE
    name: str = "custom"


def linear_model(a_matrix, b_matrix) -> SystemModel:
    a = np.asarray(a_matrix, dtype=float)
    b = np.asarray(b_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError("model.A must be square")
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise ConfigError("model.B must be n x m")
    return SystemModel(
        n=a.shape[0],
        m=b.shape[1],
        drift=lambda x: a @ x,
        input_gain=lambda x: b,
        linear=(a, b),
        native_id=NATIVE_LINEAR,
        name="linear",
    )


def cosine_gain_2d() -> SystemModel:
    """2-state plant with state-dependent input gain cos(2*x1) + 2."""

    def drift(x):
        c = np.cos(2.0 * x[0]) + 2.0
        return np.array(
            [-x[0] + x[1], -0.5 * (x[0] + x[1]) + 0.5 * x[1] * c * c]
        )

    def gain(x):
        return np.array([[0.0], [np.cos(2.0 * x[0]) + 2.0]])

    return SystemModel(
        n=2,
        m=1,
        drift=drift,
        input_gain=gain,
        native_id=NATIVE_COSINE_GAIN_2D,
        name="cosine_gain_2d",
    )


MODEL_REGISTRY = {
    "cosine_gain_2d": cosine_gain_2d,
}


def derivative(model: SystemModel, x, u, e) -> np.ndarray:
    """State velocity f(x) + g(x)(u + e)."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    xdot = model.drift(x) + model.input_gain(x) @ (u + e)
    if not np.all(np.isfinite(xdot)):
        raise NumericError(float("nan"), f"non-finite derivative at state {x}")
    return xdot


@dataclass
class AugmentedState:
    """State plus interval accumulators; accumulators reset each interval."""

    x: np.ndarray
    rho_acc: float = 0.0
    kron_acc: np.ndarray = field(default=None)


def rk4_step(model, aug: AugmentedState, controller, exploration, t, h, cost, basis_a):
    """One classical RK4 step of the augmented closed loop.

    controller maps state -> input, exploration maps time -> input (evaluated
    exactly at the stage times).  Returns a new AugmentedState.
    """
    if h <= 0:
        raise ConfigError("step size h must be positive")
    d_kron = basis_a.size * model.m
    kron0 = aug.kron_acc if aug.kron_acc is not None else np.zeros(d_kron)
    y0 = np.concatenate([aug.x, [aug.rho_acc], kron0])
    n = model.n

    def rhs(tau, y):
        x = y[:n]
        u = np.atleast_1d(controller(x))
        e = np.atleast_1d(exploration(tau))
        xdot = model.drift(x) + model.input_gain(x) @ (u + e)
        rhodot = cost.state_cost(x) + cost.input_cost_clamped(u)
        krondot = 2.0 * flatten(np.outer(basis_a.eval(x), cost.r_diag * e))
        return np.concatenate([xdot, [rhodot], krondot])

    k1 = rhs(t, y0)
    k2 = rhs(t + 0.5 * h, y0 + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y0 + 0.5 * h * k2)
    k4 = rhs(t + h, y0 + h * k3)
    y1 = y0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y1)):
        raise NumericError(t + h)
    return AugmentedState(x=y1[:n], rho_acc=float(y1[n]), kron_acc=y1[n + 1 :])
