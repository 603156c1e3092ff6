"""Running cost: quadratic state cost plus the non-quadratic saturated input cost.

The input penalty is U(u) = 2*lam * u^T R atanh(u/lam) + lam^2 * rbar . ln(1 - (u/lam)^2),
the closed form of 2*integral_0^u lam*atanh(s/lam) R ds for the tanh saturation.
It is finite on |u_i| <= lam with limit 2*lam^2*r_i*ln(2) at the bound.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, InputBoundError

# Margin used when integrator states graze the saturation bound by rounding.
_CLAMP = 1.0 - 1e-12


class SaturatedCost:
    """State cost x^T Q x, diagonal R and saturation bound lambda."""

    def __init__(self, q_matrix, r_diag, lam: float):
        q = np.asarray(q_matrix, dtype=float)
        r = np.atleast_1d(np.asarray(r_diag, dtype=float))
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ConfigError("cost.Q must be a square matrix")
        if not np.allclose(q, q.T):
            raise ConfigError("cost.Q must be symmetric")
        if np.any(np.linalg.eigvalsh(q) <= 0):
            raise ConfigError("cost.Q must be positive definite")
        if np.any(r <= 0):
            raise ConfigError("cost.r_diag entries must be positive")
        if not lam > 0:
            raise ConfigError("cost.lambda must be positive")
        self.q_matrix = q
        self.r_diag = r
        self.lam = float(lam)

    @property
    def n(self) -> int:
        return self.q_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.r_diag.shape[0]

    def state_cost(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.q_matrix @ x)

    def input_cost(self, u) -> float:
        """Closed-form U(u).  Raises InputBoundError if any |u_i| > lambda."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lam = self.lam
        total = 0.0
        for i, (ui, ri) in enumerate(zip(u, self.r_diag)):
            a = ui / lam
            if abs(a) > 1.0:
                raise InputBoundError(i, ui, lam)
            if abs(a) == 1.0:
                # finite limit of the closed form; the naive formula is inf - inf
                total += 2.0 * lam * lam * ri * np.log(2.0)
            else:
                total += 2.0 * lam * ui * ri * np.arctanh(a) + lam * lam * ri * np.log1p(-a * a)
        return total

    def input_cost_clamped(self, u) -> float:
        """U(u) with components clamped just inside the bound.

        Used inside integration loops where stage states may overshoot lambda
        by rounding; the strict API above stays strict.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        a = np.clip(u / self.lam, -_CLAMP, _CLAMP)
        lam = self.lam
        return float(
            np.sum(
                2.0 * lam * lam * a * self.r_diag * np.arctanh(a)
                + lam * lam * self.r_diag * np.log1p(-a * a)
            )
        )

    def input_cost_quadrature(self, u, tol: float = 1e-10) -> float:
        """Defining integral evaluated numerically; oracle for input_cost.

        Requires strict interior |u_i| < lambda (integrand unbounded at the
        endpoint).
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lam = self.lam
        total = 0.0
        for i, (ui, ri) in enumerate(zip(u, self.r_diag)):
            if abs(ui) >= lam:
                raise InputBoundError(i, ui, lam)
            val, _ = quad(
                lambda s: 2.0 * lam * np.arctanh(s / lam) * ri,
                0.0,
                ui,
                epsabs=tol,
                epsrel=1e-12,
                limit=200,
            )
            total += val
        return total

    def running_cost(self, x, u) -> float:
        return self.state_cost(x) + self.input_cost(u)
