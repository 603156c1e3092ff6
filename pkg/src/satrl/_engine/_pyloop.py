"""Pure-Python run loop; reference implementation and import-time fallback.

Semantics must match ``_core.pyx`` step for step: RK4 advance of
(x, rho_acc, kron_acc) with weights frozen within the step, explicit Euler
weight updates after each step, interval bookkeeping on the exact T grid.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, SimulationDiverged
from .params import (
    CADENCE_PER_INTERVAL,
    CADENCE_PER_STEP,
    EXPL_NONE,
    EXPL_SATURATED_PROBE,
    EXPL_SUM_OF_SINES,
    MODEL_LINEAR,
    NORM_DOUBLE,
    LoopParams,
)

_CLAMP = 1.0 - 1e-12


def _basis_eval(expo, x):
    return np.prod(x[None, :] ** expo, axis=1)


def run_loop(p: LoopParams) -> dict:
    n, m = p.n, p.m
    n_c = p.expo_c.shape[0]
    n_a = p.expo_a.shape[0]
    d_a = n_a * m
    d_w = n_c + d_a
    lam = p.lam
    h = p.h
    spi = p.steps_per_interval
    n_bound = p.n_steps // spi

    w = p.w0.astype(float).copy()
    wa2 = p.wa2_0.astype(float).copy()
    x = p.x0.astype(float).copy()
    rho = 0.0
    kron = np.zeros(d_a)

    def expl_base(t):
        if p.expl_kind == EXPL_NONE or t >= p.t_off - 1e-12:
            return None
        return p.expl_scale * np.sin(p.omegas * t).sum(axis=1)

    def applied_input(t, xs):
        """(u, e) at a stage point; e composes with the live actor for the probe."""
        phi_a = _basis_eval(p.expo_a, xs)
        v2 = wa2.reshape(n_a, m).T @ phi_a
        u = lam * np.tanh(v2 / lam)
        base = expl_base(t)
        if base is None:
            e = np.zeros(m)
        elif p.expl_kind == EXPL_SUM_OF_SINES:
            e = base
        else:  # EXPL_SATURATED_PROBE
            e = lam * np.tanh((base + v2) / lam) - u
        return phi_a, u, e

    def input_cost(u):
        a = np.clip(u / lam, -_CLAMP, _CLAMP)
        return float(
            np.sum(lam * lam * p.r_diag * (2.0 * a * np.arctanh(a) + np.log1p(-a * a)))
        )

    def rhs(t, xs):
        phi_a, u, e = applied_input(t, xs)
        if p.model_kind == MODEL_LINEAR:
            xdot = p.a_matrix @ xs + p.b_matrix @ (u + e)
        else:
            xdot = p.drift(xs) + p.input_gain(xs) @ (u + e)
        rhodot = float(xs @ p.q_matrix @ xs) + input_cost(u)
        krondot = 2.0 * np.outer(phi_a, p.r_diag * e).reshape(-1)
        return xdot, rhodot, krondot

    def critic_gain(dt):
        """Weight increment coefficient for one critic step of length dt.

        Integrates W' = -alpha1 * (delta/ms) * (delta'W + rho) exactly over
        the step (regressor frozen): the Bellman error decays by
        exp(-alpha1*c*dt) with c = delta'delta/ms, so the increment is
        -(1 - exp(-alpha1*c*dt))/c * E * delta/ms.  Reduces to the Euler
        step -dt*alpha1*E*delta/ms as alpha1*c*dt -> 0 and stays stable
        for stiff gains (case alpha1*h >> 1).
        """
        err = float(w @ s_delta) + s_rho
        dd = float(s_delta @ s_delta)
        ms = 1.0 + dd
        if p.normalization == NORM_DOUBLE:
            ms *= ms
        c = dd / ms
        if c > 1e-300:
            factor = -np.expm1(-p.alpha1 * c * dt) / c
        else:
            factor = p.alpha1 * dt
        return err, ms, factor

    def actor_step(dt, xs):
        phi_a = _basis_eval(p.expo_a, xs)
        v2 = wa2.reshape(n_a, m).T @ phi_a
        v1 = w[n_c:].reshape(n_a, m).T @ phi_a
        th2 = np.tanh(v2 / lam)
        e_u = lam * p.r_diag * (th2 - np.tanh(v1 / lam))
        grad = np.outer(phi_a, e_u * (1.0 - th2 * th2)).reshape(-1)
        return -dt * p.alpha2 * (p.y_matrix @ wa2 + grad)

    # logs
    weights_hist = np.empty((n_bound + 1, d_w + d_a))
    weights_hist[0, :d_w] = w
    weights_hist[0, d_w:] = wa2
    bound_t = np.empty(n_bound)
    delta_hist = np.zeros((n_bound, d_w))
    rho_hist = np.zeros(n_bound)
    valid = np.zeros(n_bound, dtype=np.uint8)
    traj_t, traj_x, traj_u, traj_e, traj_cost = [], [], [], [], []
    reset_times = []

    phi_start = _basis_eval(p.expo_c, x)
    s_delta = np.zeros(d_w)
    s_rho = 0.0
    have_sample = False
    dirty = False

    def log_traj(t, xs):
        _, u, e = applied_input(t, xs)
        traj_t.append(t)
        traj_x.append(xs.copy())
        traj_u.append(u)
        traj_e.append(e)
        traj_cost.append(float(xs @ p.q_matrix @ xs) + input_cost(u))

    for k in range(p.n_steps):
        t = k * h
        frozen = p.freeze_after_toff and t >= p.t_off - 1e-12
        if k % p.traj_stride == 0:
            log_traj(t, x)

        # RK4 on the augmented state, weights held fixed
        k1x, k1r, k1k = rhs(t, x)
        k2x, k2r, k2k = rhs(t + 0.5 * h, x + 0.5 * h * k1x)
        k3x, k3r, k3k = rhs(t + 0.5 * h, x + 0.5 * h * k2x)
        k4x, k4r, k4k = rhs(t + h, x + h * k3x)
        x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        rho_new = rho + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        kron_new = kron + (h / 6.0) * (k1k + 2.0 * k2k + 2.0 * k3k + k4k)
        if not (np.all(np.isfinite(x_new)) and np.isfinite(rho_new)):
            raise NumericError(t + h)

        # synchronous Euler weight updates, evaluated at the step-start state
        if not frozen:
            if p.cadence == CADENCE_PER_STEP:
                dwa2 = actor_step(h, x)
                if have_sample:
                    err, ms, factor = critic_gain(h)
                    w = w - factor / ms * err * s_delta
                wa2 = wa2 + dwa2

        x, rho, kron = x_new, rho_new, kron_new

        # divergence guard: resample the state, keep the weights
        if np.max(np.abs(x)) > p.x_max:
            reset_times.append(t + h)
            if len(reset_times) > p.max_resets:
                raise SimulationDiverged(t + h, x.copy(), "reset budget exhausted")
            x = np.asarray(p.reset_draw(), dtype=float)
            rho = 0.0
            kron = np.zeros(d_a)
            phi_start = _basis_eval(p.expo_c, x)
            dirty = True

        if (k + 1) % spi == 0:
            b = (k + 1) // spi - 1
            bound_t[b] = (k + 1) * h
            if not dirty:
                delta = np.concatenate([_basis_eval(p.expo_c, x) - phi_start, kron])
                delta_hist[b] = delta
                rho_hist[b] = rho
                valid[b] = 1
                s_delta, s_rho = delta, rho
                have_sample = True
                if p.cadence == CADENCE_PER_INTERVAL and not frozen:
                    dwa2 = actor_step(spi * h, x)
                    err, ms, factor = critic_gain(spi * h)
                    w = w - factor / ms * err * s_delta
                    wa2 = wa2 + dwa2
            weights_hist[b + 1, :d_w] = w
            weights_hist[b + 1, d_w:] = wa2
            rho = 0.0
            kron = np.zeros(d_a)
            phi_start = _basis_eval(p.expo_c, x)
            dirty = False

    log_traj(p.n_steps * h, x)

    return {
        "weights_hist": weights_hist,
        "bound_t": bound_t,
        "delta_hist": delta_hist,
        "rho_hist": rho_hist,
        "valid": valid,
        "traj_t": np.asarray(traj_t),
        "traj_x": np.asarray(traj_x).reshape(-1, n),
        "traj_u": np.asarray(traj_u).reshape(-1, m),
        "traj_e": np.asarray(traj_e).reshape(-1, m),
        "traj_cost": np.asarray(traj_cost),
        "reset_times": np.asarray(reset_times),
        "final_x": x.copy(),
        "final_w": w.copy(),
        "final_wa2": wa2.copy(),
    }
