"""Critic and actor parameterizations and the weight-flattening convention.

Actor weight matrices have shape (N_a, m): column j holds the weights of the
j-th pre-saturation input channel.  ``flatten`` is row-major, which is the
ordering that makes

    flatten(W) . kron(phi_a, R e) == phi_a^T W (R e)

hold exactly; that identity (not the convention itself) is the contract the
interval regressor relies on.
"""

from __future__ import annotations

import numpy as np


def flatten(w_a) -> np.ndarray:
    """Row-major column vector of an (N_a, m) actor weight matrix."""
    return np.asarray(w_a, dtype=float).reshape(-1)


def unflatten(vec, n_terms: int, m: int) -> np.ndarray:
    """Inverse of flatten; exact round-trip."""
    return np.asarray(vec, dtype=float).reshape(n_terms, m)


def stack_weights(w_c, w_a1) -> np.ndarray:
    """Stacked critic vector [w_c ; flatten(w_a1)]."""
    return np.concatenate([np.asarray(w_c, dtype=float), flatten(w_a1)])


def split_stacked(w_stacked, n_c: int, n_a: int, m: int):
    """Recover (w_c, w_a1 matrix) from a stacked critic vector."""
    w = np.asarray(w_stacked, dtype=float)
    if w.shape[0] != n_c + n_a * m:
        raise ValueError(
            f"stacked vector has length {w.shape[0]}, expected {n_c + n_a * m}"
        )
    return w[:n_c].copy(), unflatten(w[n_c:], n_a, m)


def value_estimate(w_c, basis_c, x) -> float:
    """Critic value estimate w_c . phi_c(x)."""
    return float(np.asarray(w_c, dtype=float) @ basis_c.eval(x))


def v1_estimate(w_a, basis_a, x) -> np.ndarray:
    """Pre-saturation actor output W^T phi_a(x), one entry per input channel."""
    return np.asarray(w_a, dtype=float).T @ basis_a.eval(x)


def policy_estimate(w_a2, basis_a, cost, x) -> np.ndarray:
    """Saturated policy lam * tanh(v2 / lam); strictly inside the bound."""
    lam = cost.lam
    return lam * np.tanh(v1_estimate(w_a2, basis_a, x) / lam)
