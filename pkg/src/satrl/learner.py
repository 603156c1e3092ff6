"""Interval regressor, Bellman/actor errors and the synchronous tuning laws.

The critic law is the normalized gradient step

    Wdot = -alpha1 * delta / (1 + delta.delta) * E,      E = W.delta + rho

and the actor law for the applied weights is

    col{wa2}dot = -alpha2 * (Y col{wa2} + kron(phi_a, E_u * (1 - tanh^2(v2/lam))))

where the two Kronecker blocks use the same row-major flattening as
``approximator.flatten``.  The proof-side variant with a squared
normalization is available via ``normalization="double"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .approximator import flatten, v1_estimate
from .errors import ConfigError


@dataclass(frozen=True)
class RegressorSample:
    """One reinforcement interval's regressor delta and reinforcement rho."""

    delta: np.ndarray
    rho: float
    t_start: float
    t_end: float


@dataclass(frozen=True)
class LearnerConfig:
    alpha1: float
    alpha2: float
    y_matrix: np.ndarray
    interval: float  # reinforcement interval T, seconds
    normalization: str = "single"
    update_cadence: str = "per_step"

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ConfigError("learner.alpha1 and learner.alpha2 must be positive")
        if self.interval <= 0:
            raise ConfigError("learner.T must be positive")
        y = np.asarray(self.y_matrix, dtype=float)
        if y.ndim != 2 or y.shape[0] != y.shape[1]:
            raise ConfigError("learner.Y must be a square matrix")
        if not np.allclose(y, y.T) or np.any(np.linalg.eigvalsh(y) <= 0):
            raise ConfigError("learner.Y must be symmetric positive definite")
        if self.normalization not in ("single", "double"):
            raise ConfigError("learner.normalization must be 'single' or 'double'")
        if self.update_cadence not in ("per_step", "per_interval"):
            raise ConfigError(
                "learner.update_cadence must be 'per_step' or 'per_interval'"
            )
        object.__setattr__(self, "y_matrix", y)


def build_regressor(phi_c_start, phi_c_end, kron_acc, rho_acc, t0, t1) -> RegressorSample:
    """Assemble delta = [phi_c(end) - phi_c(start) ; kron_acc] and rho."""
    d_phi = np.asarray(phi_c_end, dtype=float) - np.asarray(phi_c_start, dtype=float)
    kron_acc = np.asarray(kron_acc, dtype=float)
    if d_phi.ndim != 1 or kron_acc.ndim != 1:
        raise ConfigError("regressor blocks must be vectors")
    return RegressorSample(
        delta=np.concatenate([d_phi, kron_acc]),
        rho=float(rho_acc),
        t_start=float(t0),
        t_end=float(t1),
    )


def bellman_error(w_stacked, sample: RegressorSample) -> float:
    """Critic residual E = W.delta + rho."""
    return float(np.asarray(w_stacked, dtype=float) @ sample.delta + sample.rho)


def _normalizer(delta, normalization):
    ms = 1.0 + float(delta @ delta)
    return ms * ms if normalization == "double" else ms


def critic_update(w_stacked, sample: RegressorSample, cfg: LearnerConfig, dt: float):
    """Explicit Euler step of the critic law; returns the new stacked vector."""
    w = np.asarray(w_stacked, dtype=float)
    err = bellman_error(w, sample)
    ms = _normalizer(sample.delta, cfg.normalization)
    return w - dt * cfg.alpha1 * sample.delta / ms * err


def actor_error(w_a1, w_a2, basis_a, cost, x) -> np.ndarray:
    """E_u = lam * R * (tanh(v2/lam) - tanh(v1/lam)); zero when wa1 == wa2."""
    lam = cost.lam
    v1 = v1_estimate(w_a1, basis_a, x)
    v2 = v1_estimate(w_a2, basis_a, x)
    return lam * cost.r_diag * (np.tanh(v2 / lam) - np.tanh(v1 / lam))


def actor_gradient(w_a2, e_u, basis_a, cost, x) -> np.ndarray:
    """Data term of the actor law: gradient of 0.5 * E_u^T R^-1 E_u w.r.t. col{wa2}.

    The two Kronecker terms of the tuning law regroup exactly as
    (E_u * (1 - tanh^2(v2/lam))) against phi_a; the leakage Y col{wa2} is
    added by actor_update.
    """
    lam = cost.lam
    phi_a = basis_a.eval(x)
    v2 = v1_estimate(w_a2, basis_a, x)
    th2 = np.tanh(v2 / lam)
    return flatten(np.outer(phi_a, e_u * (1.0 - th2 * th2)))


def actor_update(w_a2, e_u, basis_a, cost, x, cfg: LearnerConfig, dt: float):
    """Explicit Euler step of the actor law; returns the new (N_a, m) matrix."""
    w = np.asarray(w_a2, dtype=float)
    col = flatten(w)
    grad = actor_gradient(w, np.atleast_1d(e_u), basis_a, cost, x)
    col = col - dt * cfg.alpha2 * (cfg.y_matrix @ col + grad)
    return col.reshape(w.shape)


@dataclass(frozen=True)
class ExcitationReport:
    gram: np.ndarray
    min_eig: float
    full_window: bool


def pe_gram(deltas, window: int) -> ExcitationReport:
    """Windowed Gram matrix of the normalized regressor and its minimum eigenvalue.

    Runtime excitation monitor: sums outer products of
    delta_bar = delta / (1 + delta.delta) over the last ``window`` samples.
    Sets ``full_window=False`` when fewer samples are available.
    """
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    full = deltas.shape[0] >= window
    tail = deltas[-window:]
    norms = 1.0 + np.einsum("ij,ij->i", tail, tail)
    bar = tail / norms[:, None]
    gram = bar.T @ bar
    min_eig = float(np.linalg.eigvalsh(gram)[0]) if gram.size else 0.0
    return ExcitationReport(gram=gram, min_eig=min_eig, full_window=full)
