# cython: language_level=3
"""Compiled run loop.  Semantics mirror ``_pyloop.run_loop`` step for step;
the pure-Python module is the readable reference, this one is the fast path.

Linear plants and the built-in cosine-gain plant evaluate entirely in C;
custom plants fall back to per-stage Python callbacks for f(x) and g(x).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atanh, cos, expm1, fabs, isfinite, log1p, sin, tanh

from ..errors import NumericError, SimulationDiverged

cnp.import_array()

cdef double CLAMP = 1.0 - 1e-12

cdef int MODEL_LINEAR = 0
cdef int MODEL_CALLABLE = 1
cdef int MODEL_COSINE_GAIN_2D = 2
cdef int EXPL_NONE = 0
cdef int EXPL_SUM_OF_SINES = 1
cdef int EXPL_SATURATED_PROBE = 2
cdef int CADENCE_PER_STEP = 0
cdef int CADENCE_PER_INTERVAL = 1
cdef int NORM_DOUBLE = 1


cdef void basis_eval(long[:, ::1] expo, double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double v
    for i in range(expo.shape[0]):
        v = 1.0
        for j in range(expo.shape[1]):
            for k in range(expo[i, j]):
                v *= x[j]
        out[i] = v


cdef double saturated_input_cost(double[::1] u, double[::1] r, double lam) noexcept nogil:
    cdef Py_ssize_t j
    cdef double a, tot = 0.0
    for j in range(u.shape[0]):
        a = u[j] / lam
        if a > CLAMP:
            a = CLAMP
        elif a < -CLAMP:
            a = -CLAMP
        tot += lam * lam * r[j] * (2.0 * a * atanh(a) + log1p(-a * a))
    return tot


cdef class _Loop:
    cdef:
        Py_ssize_t n, m, n_c, n_a, d_a, d_w
        int model_kind, expl_kind, norm, cadence
        long[:, ::1] expo_c, expo_a
        double[:, ::1] A, B, Q, Y, omegas
        double[::1] r_diag
        double lam, h, t_off, alpha1, alpha2, x_max, expl_scale
        bint freeze
        object drift, gain, reset_draw
        # live state
        double[::1] x, w, wa2, kron
        double rho
        # scratch
        double[::1] xs, phi_a, phi_c_buf, v2, u, e, xdot, kdot
        double[::1] xnp

    def __init__(self, p):
        self.n = p.n
        self.m = p.m
        self.expo_c = np.ascontiguousarray(p.expo_c, dtype=np.int64)
        self.expo_a = np.ascontiguousarray(p.expo_a, dtype=np.int64)
        self.n_c = self.expo_c.shape[0]
        self.n_a = self.expo_a.shape[0]
        self.d_a = self.n_a * self.m
        self.d_w = self.n_c + self.d_a
        self.model_kind = p.model_kind
        self.A = np.ascontiguousarray(p.a_matrix, dtype=float)
        self.B = np.ascontiguousarray(p.b_matrix, dtype=float)
        self.drift = p.drift
        self.gain = p.input_gain
        self.Q = np.ascontiguousarray(p.q_matrix, dtype=float)
        self.r_diag = np.ascontiguousarray(p.r_diag, dtype=float)
        self.lam = p.lam
        self.expl_kind = p.expl_kind
        self.omegas = np.ascontiguousarray(p.omegas, dtype=float)
        self.expl_scale = p.expl_scale
        self.t_off = p.t_off
        self.alpha1 = p.alpha1
        self.alpha2 = p.alpha2
        self.Y = np.ascontiguousarray(p.y_matrix, dtype=float)
        self.norm = p.normalization
        self.cadence = p.cadence
        self.freeze = p.freeze_after_toff
        self.h = p.h
        self.x_max = p.x_max
        self.reset_draw = p.reset_draw

        self.x = np.array(p.x0, dtype=float)
        self.w = np.array(p.w0, dtype=float)
        self.wa2 = np.array(p.wa2_0, dtype=float)
        self.kron = np.zeros(self.d_a)
        self.rho = 0.0

        self.xs = np.empty(self.n)
        self.phi_a = np.empty(self.n_a)
        self.phi_c_buf = np.empty(self.n_c)
        self.v2 = np.empty(self.m)
        self.u = np.empty(self.m)
        self.e = np.empty(self.m)
        self.xdot = np.empty(self.n)
        self.kdot = np.empty(self.d_a)
        self.xnp = np.empty(self.n)

    cdef double stage(self, double t) except? -1.0e308:
        """Stage derivative at (t, self.xs) with current weights.

        Fills self.xdot, self.kdot, self.u, self.e; returns rho-dot.
        """
        cdef Py_ssize_t i, j, k
        cdef double s, c, base, rd
        basis_eval(self.expo_a, self.xs, self.phi_a)
        for j in range(self.m):
            s = 0.0
            for i in range(self.n_a):
                s += self.wa2[i * self.m + j] * self.phi_a[i]
            self.v2[j] = s
            self.u[j] = self.lam * tanh(s / self.lam)
        # exploration
        if self.expl_kind == EXPL_NONE or t >= self.t_off - 1e-12:
            for j in range(self.m):
                self.e[j] = 0.0
        else:
            for j in range(self.m):
                base = 0.0
                for k in range(self.omegas.shape[1]):
                    base += sin(self.omegas[j, k] * t)
                base *= self.expl_scale
                if self.expl_kind == EXPL_SUM_OF_SINES:
                    self.e[j] = base
                else:
                    self.e[j] = self.lam * tanh((base + self.v2[j]) / self.lam) - self.u[j]
        # plant
        if self.model_kind == MODEL_LINEAR:
            for i in range(self.n):
                s = 0.0
                for j in range(self.n):
                    s += self.A[i, j] * self.xs[j]
                for j in range(self.m):
                    s += self.B[i, j] * (self.u[j] + self.e[j])
                self.xdot[i] = s
        elif self.model_kind == MODEL_COSINE_GAIN_2D:
            c = cos(2.0 * self.xs[0]) + 2.0
            self.xdot[0] = -self.xs[0] + self.xs[1]
            self.xdot[1] = (
                -0.5 * (self.xs[0] + self.xs[1])
                + 0.5 * self.xs[1] * c * c
                + c * (self.u[0] + self.e[0])
            )
        else:
            for i in range(self.n):
                self.xnp[i] = self.xs[i]
            x_arr = np.asarray(self.xnp)
            fd = np.asarray(self.drift(x_arr), dtype=float)
            gd = np.asarray(self.gain(x_arr), dtype=float).reshape(self.n, self.m)
            for i in range(self.n):
                s = fd[i]
                for j in range(self.m):
                    s += gd[i, j] * (self.u[j] + self.e[j])
                self.xdot[i] = s
        # running cost and exploration cross term
        rd = 0.0
        for i in range(self.n):
            s = 0.0
            for j in range(self.n):
                s += self.Q[i, j] * self.xs[j]
            rd += self.xs[i] * s
        rd += saturated_input_cost(self.u, self.r_diag, self.lam)
        for i in range(self.n_a):
            for j in range(self.m):
                self.kdot[i * self.m + j] = 2.0 * self.phi_a[i] * self.r_diag[j] * self.e[j]
        return rd


def run_loop(p):
    cdef _Loop L = _Loop(p)
    cdef Py_ssize_t n = L.n, m = L.m, n_c = L.n_c, n_a = L.n_a
    cdef Py_ssize_t d_a = L.d_a, d_w = L.d_w
    cdef Py_ssize_t n_steps = p.n_steps, spi = p.steps_per_interval
    cdef Py_ssize_t stride = p.traj_stride
    cdef Py_ssize_t n_bound = n_steps // spi
    cdef Py_ssize_t k_step, i, j, b, n_resets = 0, traj_row = 0
    cdef int max_resets = p.max_resets
    cdef double h = L.h, t, rho_new, ms, err, rd
    cdef bint frozen, dirty = False, have_sample = False
    cdef double s_rho = 0.0

    cdef double[::1] k1x = np.empty(n), k2x = np.empty(n), k3x = np.empty(n), k4x = np.empty(n)
    cdef double[::1] k1k = np.empty(d_a), k2k = np.empty(d_a), k3k = np.empty(d_a), k4k = np.empty(d_a)
    cdef double k1r, k2r, k3r, k4r
    cdef double[::1] x_new = np.empty(n), kron_new = np.empty(d_a)
    cdef double[::1] s_delta = np.zeros(d_w)
    cdef double[::1] phi_start = np.empty(n_c)
    cdef double[::1] v1 = np.empty(m), e_u = np.empty(m), dwa2 = np.empty(d_a)

    weights_hist_np = np.empty((n_bound + 1, d_w + d_a))
    bound_t_np = np.empty(n_bound)
    delta_hist_np = np.zeros((n_bound, d_w))
    rho_hist_np = np.zeros(n_bound)
    valid_np = np.zeros(n_bound, dtype=np.uint8)
    cdef Py_ssize_t n_traj = (n_steps + stride - 1) // stride + 1
    traj_t_np = np.empty(n_traj)
    traj_x_np = np.empty((n_traj, n))
    traj_u_np = np.empty((n_traj, m))
    traj_e_np = np.empty((n_traj, m))
    traj_cost_np = np.empty(n_traj)
    reset_times = []

    cdef double[:, ::1] weights_hist = weights_hist_np
    cdef double[::1] bound_t = bound_t_np
    cdef double[:, ::1] delta_hist = delta_hist_np
    cdef double[::1] rho_hist = rho_hist_np
    cdef unsigned char[::1] valid = valid_np
    cdef double[::1] traj_t = traj_t_np
    cdef double[:, ::1] traj_x = traj_x_np
    cdef double[:, ::1] traj_u = traj_u_np
    cdef double[:, ::1] traj_e = traj_e_np
    cdef double[::1] traj_cost = traj_cost_np

    for i in range(d_w):
        weights_hist[0, i] = L.w[i]
    for i in range(d_a):
        weights_hist[0, d_w + i] = L.wa2[i]
    basis_eval(L.expo_c, L.x, phi_start)

    for k_step in range(n_steps):
        t = k_step * h
        frozen = L.freeze and t >= L.t_off - 1e-12

        if k_step % stride == 0:
            for i in range(n):
                L.xs[i] = L.x[i]
            rd = L.stage(t)
            traj_t[traj_row] = t
            for i in range(n):
                traj_x[traj_row, i] = L.x[i]
            for j in range(m):
                traj_u[traj_row, j] = L.u[j]
                traj_e[traj_row, j] = L.e[j]
            traj_cost[traj_row] = rd
            traj_row += 1

        # RK4 stages (weights fixed within the step)
        for i in range(n):
            L.xs[i] = L.x[i]
        k1r = L.stage(t)
        for i in range(n):
            k1x[i] = L.xdot[i]
        for i in range(d_a):
            k1k[i] = L.kdot[i]
        for i in range(n):
            L.xs[i] = L.x[i] + 0.5 * h * k1x[i]
        k2r = L.stage(t + 0.5 * h)
        for i in range(n):
            k2x[i] = L.xdot[i]
        for i in range(d_a):
            k2k[i] = L.kdot[i]
        for i in range(n):
            L.xs[i] = L.x[i] + 0.5 * h * k2x[i]
        k3r = L.stage(t + 0.5 * h)
        for i in range(n):
            k3x[i] = L.xdot[i]
        for i in range(d_a):
            k3k[i] = L.kdot[i]
        for i in range(n):
            L.xs[i] = L.x[i] + h * k3x[i]
        k4r = L.stage(t + h)
        for i in range(n):
            k4x[i] = L.xdot[i]
        for i in range(d_a):
            k4k[i] = L.kdot[i]

        for i in range(n):
            x_new[i] = L.x[i] + (h / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
        rho_new = L.rho + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        for i in range(d_a):
            kron_new[i] = L.kron[i] + (h / 6.0) * (k1k[i] + 2.0 * k2k[i] + 2.0 * k3k[i] + k4k[i])
        for i in range(n):
            if not isfinite(x_new[i]):
                raise NumericError(t + h)
        if not isfinite(rho_new):
            raise NumericError(t + h)

        # synchronous Euler weight updates, evaluated at the step-start state
        if not frozen and L.cadence == CADENCE_PER_STEP:
            _weight_updates(L, h, L.x, s_delta, s_rho, have_sample, v1, e_u, dwa2)

        for i in range(n):
            L.x[i] = x_new[i]
        L.rho = rho_new
        for i in range(d_a):
            L.kron[i] = kron_new[i]

        # divergence guard: resample the state, keep the weights
        ms = 0.0
        for i in range(n):
            if fabs(L.x[i]) > ms:
                ms = fabs(L.x[i])
        if ms > L.x_max:
            n_resets += 1
            reset_times.append(t + h)
            if n_resets > max_resets:
                raise SimulationDiverged(t + h, np.asarray(L.x).copy(), "reset budget exhausted")
            fresh = np.asarray(L.reset_draw(), dtype=float)
            for i in range(n):
                L.x[i] = fresh[i]
            L.rho = 0.0
            for i in range(d_a):
                L.kron[i] = 0.0
            basis_eval(L.expo_c, L.x, phi_start)
            dirty = True

        if (k_step + 1) % spi == 0:
            b = (k_step + 1) // spi - 1
            bound_t[b] = (k_step + 1) * h
            if not dirty:
                basis_eval(L.expo_c, L.x, L.phi_c_buf)
                for i in range(n_c):
                    s_delta[i] = L.phi_c_buf[i] - phi_start[i]
                for i in range(d_a):
                    s_delta[n_c + i] = L.kron[i]
                s_rho = L.rho
                have_sample = True
                for i in range(d_w):
                    delta_hist[b, i] = s_delta[i]
                rho_hist[b] = s_rho
                valid[b] = 1
                if L.cadence == CADENCE_PER_INTERVAL and not frozen:
                    _weight_updates(L, spi * h, L.x, s_delta, s_rho, have_sample, v1, e_u, dwa2)
            for i in range(d_w):
                weights_hist[b + 1, i] = L.w[i]
            for i in range(d_a):
                weights_hist[b + 1, d_w + i] = L.wa2[i]
            L.rho = 0.0
            for i in range(d_a):
                L.kron[i] = 0.0
            basis_eval(L.expo_c, L.x, phi_start)
            dirty = False

    # final trajectory row
    for i in range(n):
        L.xs[i] = L.x[i]
    rd = L.stage(n_steps * h)
    traj_t[traj_row] = n_steps * h
    for i in range(n):
        traj_x[traj_row, i] = L.x[i]
    for j in range(m):
        traj_u[traj_row, j] = L.u[j]
        traj_e[traj_row, j] = L.e[j]
    traj_cost[traj_row] = rd
    traj_row += 1

    return {
        "weights_hist": weights_hist_np,
        "bound_t": bound_t_np,
        "delta_hist": delta_hist_np,
        "rho_hist": rho_hist_np,
        "valid": valid_np,
        "traj_t": traj_t_np[:traj_row].copy(),
        "traj_x": traj_x_np[:traj_row].copy(),
        "traj_u": traj_u_np[:traj_row].copy(),
        "traj_e": traj_e_np[:traj_row].copy(),
        "traj_cost": traj_cost_np[:traj_row].copy(),
        "reset_times": np.asarray(reset_times, dtype=float),
        "final_x": np.asarray(L.x).copy(),
        "final_w": np.asarray(L.w).copy(),
        "final_wa2": np.asarray(L.wa2).copy(),
    }


cdef void _weight_updates(
    _Loop L,
    double dt,
    double[::1] x_at,
    double[::1] s_delta,
    double s_rho,
    bint have_sample,
    double[::1] v1,
    double[::1] e_u,
    double[::1] dwa2,
) noexcept:
    """Critic and actor Euler steps from the same pre-update weights."""
    cdef Py_ssize_t i, j
    cdef double s, th2, err, ms, dd, c, factor
    basis_eval(L.expo_a, x_at, L.phi_a)
    for j in range(L.m):
        s = 0.0
        for i in range(L.n_a):
            s += L.wa2[i * L.m + j] * L.phi_a[i]
        L.v2[j] = s
        s = 0.0
        for i in range(L.n_a):
            s += L.w[L.n_c + i * L.m + j] * L.phi_a[i]
        v1[j] = s
        e_u[j] = L.lam * L.r_diag[j] * (tanh(L.v2[j] / L.lam) - tanh(v1[j] / L.lam))
    for i in range(L.d_a):
        s = 0.0
        for j in range(L.d_a):
            s += L.Y[i, j] * L.wa2[j]
        dwa2[i] = s
    for i in range(L.n_a):
        for j in range(L.m):
            th2 = tanh(L.v2[j] / L.lam)
            dwa2[i * L.m + j] += L.phi_a[i] * e_u[j] * (1.0 - th2 * th2)
    if have_sample:
        # exact step of W' = -alpha1*(delta/ms)*(delta'W + rho) with the
        # regressor frozen; reduces to Euler as alpha1*c*dt -> 0 and stays
        # stable for stiff gains (alpha1*h >> 1)
        err = s_rho
        dd = 0.0
        for i in range(L.d_w):
            err += L.w[i] * s_delta[i]
            dd += s_delta[i] * s_delta[i]
        ms = 1.0 + dd
        if L.norm == NORM_DOUBLE:
            ms *= ms
        c = dd / ms
        if c > 1e-300:
            factor = -expm1(-L.alpha1 * c * dt) / c
        else:
            factor = L.alpha1 * dt
        for i in range(L.d_w):
            L.w[i] -= factor / ms * err * s_delta[i]
    for i in range(L.d_a):
        L.wa2[i] -= dt * L.alpha2 * dwa2[i]
