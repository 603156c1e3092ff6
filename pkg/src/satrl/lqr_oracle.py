"""Ground truth for the linear case: Kleinman-Newton Riccati solver.

Each Newton step solves a Lyapunov equation by the dense Kronecker
linear-system method (n^2 unknowns), so the solver needs nothing beyond a
linear solve and doubles as an independent oracle for the learned weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximator import flatten, stack_weights
from .errors import ConfigError, OracleError


@dataclass(frozen=True)
class LinearPlant:
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n) or b.shape[0] != n or q.shape != (n, n):
            raise ConfigError("plant dimensions are inconsistent")
        m = b.shape[1]
        if r.shape != (m, m):
            raise ConfigError("plant R must be m x m")
        if not np.allclose(q, q.T) or not np.allclose(r, r.T):
            raise ConfigError("plant Q and R must be symmetric")
        if np.any(np.linalg.eigvalsh(r) <= 0):
            raise ConfigError("plant R must be positive definite")
        for name, val in (("a", a), ("b", b), ("q", q), ("r", r)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


def solve_lyapunov(a_cl, rhs) -> np.ndarray:
    """Solve A_cl^T P + P A_cl = -rhs via the vectorized linear system."""
    a_cl = np.asarray(a_cl, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = a_cl.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A^T P) = kron(A^T, I) vec(P), vec(P A) = kron(I, A^T) vec(P)
    lhs = np.kron(a_cl.T, eye) + np.kron(eye, a_cl.T)
    p = np.linalg.solve(lhs, -rhs.reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def _is_positive_definite(mat) -> bool:
    try:
        np.linalg.cholesky(mat)
        return True
    except np.linalg.LinAlgError:
        return False


def _find_stabilizing_gain(plant: LinearPlant) -> np.ndarray:
    """Grid search K = c * B^T, testing closed-loop stability via Lyapunov PD."""
    for c in (2.0**k for k in range(0, 7)):
        gain = c * plant.b.T
        a_cl = plant.a - plant.b @ gain
        try:
            p = solve_lyapunov(a_cl, np.eye(plant.n))
        except np.linalg.LinAlgError:
            continue
        if _is_positive_definite(p):
            return gain
    raise OracleError("no stabilizing initial gain found (plant not stabilizable?)")


def are_residual(plant: LinearPlant, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return (
        plant.a.T @ p
        + p @ plant.a
        - p @ plant.b @ np.linalg.solve(plant.r, plant.b.T) @ p
        + plant.q
    )


def solve_are(plant: LinearPlant, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Kleinman-Newton iteration for the continuous-time ARE.

    Each iterate solves A_cl^T P + P A_cl = -(Q + K^T R K) with
    K = R^-1 B^T P of the previous iterate; converges monotonically from a
    stabilizing gain.
    """
    gain = _find_stabilizing_gain(plant)
    p = None
    for _ in range(max_iter):
        a_cl = plant.a - plant.b @ gain
        p = solve_lyapunov(a_cl, plant.q + gain.T @ plant.r @ gain)
        gain = np.linalg.solve(plant.r, plant.b.T @ p)
        if np.max(np.abs(are_residual(plant, p))) <= tol:
            return p
    raise OracleError(
        f"Kleinman iteration did not reach residual {tol:g} in {max_iter} steps"
    )


def lqr_gain(plant: LinearPlant, p) -> np.ndarray:
    return np.linalg.solve(plant.r, plant.b.T @ np.asarray(p, dtype=float))


def lqr_reference_weights(plant: LinearPlant, basis_c, basis_a, p=None) -> np.ndarray:
    """Map the ARE solution onto the basis weights [w_c* ; flatten(w_a*)].

    Requires basis_c to be exactly the quadratic monomials of the state and
    basis_a exactly the linear ones; raises ConfigError listing unmatched
    monomials otherwise.
    """
    if p is None:
        p = solve_are(plant)
    p = np.asarray(p, dtype=float)
    n = plant.n

    w_c = np.empty(basis_c.size)
    for idx, expo in enumerate(basis_c.exponents):
        nz = np.nonzero(expo)[0]
        if len(nz) == 1 and expo[nz[0]] == 2:
            w_c[idx] = p[nz[0], nz[0]]
        elif len(nz) == 2 and expo[nz[0]] == 1 and expo[nz[1]] == 1:
            w_c[idx] = 2.0 * p[nz[0], nz[1]]
        else:
            raise ConfigError(
                f"basis_c term {expo.tolist()} is not a quadratic monomial"
            )

    gain = lqr_gain(plant, p)  # v*(x) = -K x
    w_a = np.empty((basis_a.size, plant.m))
    for idx, expo in enumerate(basis_a.exponents):
        nz = np.nonzero(expo)[0]
        if len(nz) != 1 or expo[nz[0]] != 1:
            raise ConfigError(f"basis_a term {expo.tolist()} is not a linear monomial")
        w_a[idx, :] = -gain[:, nz[0]]
    return stack_weights(w_c, w_a)


def reconstruct_p(w_c, basis_c, n: int) -> np.ndarray:
    """Inverse of the w_c mapping; used for round-trip checks."""
    p = np.zeros((n, n))
    for coeff, expo in zip(np.asarray(w_c, dtype=float), basis_c.exponents):
        nz = np.nonzero(expo)[0]
        if len(nz) == 1:
            p[nz[0], nz[0]] = coeff
        else:
            p[nz[0], nz[1]] = p[nz[1], nz[0]] = 0.5 * coeff
    return p


def verify_hjb_residual(w_c, w_a2, model, basis_c, basis_a, cost, states):
    """Pointwise residual Q + U(u_hat) + (grad phi_c^T w_c) . (f + g u_hat).

    Diagnostic only; this is the one oracle-side check that uses model
    knowledge.  Returns per-state residuals plus summary statistics.
    """
    w_c = np.asarray(w_c, dtype=float)
    w_a2 = np.asarray(w_a2, dtype=float)
    lam = cost.lam
    residuals = []
    for x in np.atleast_2d(np.asarray(states, dtype=float)):
        u = lam * np.tanh((w_a2.T @ basis_a.eval(x)) / lam)
        grad_v = basis_c.jacobian(x).T @ w_c
        xdot = model.drift(x) + model.input_gain(x) @ u
        residuals.append(cost.state_cost(x) + cost.input_cost_clamped(u) + grad_v @ xdot)
    residuals = np.asarray(residuals)
    return {
        "residuals": residuals,
        "max_abs": float(np.max(np.abs(residuals))) if residuals.size else 0.0,
        "mean_abs": float(np.mean(np.abs(residuals))) if residuals.size else 0.0,
    }
