"""Acceptance gate: end-to-end checks of the learning runs against the
independent Riccati oracle plus the invariant spot-checks.

Each criterion prints one PASS/FAIL line (visible with ``pytest -rA`` or on
failure).  One check is expected to fail and documents why in its assertion
message: the published reference vector for the linear case is internally
inconsistent (see test_criterion_2b).
"""

import numpy as np
import pytest

from satrl._engine import get_engine
from satrl.approximator import policy_estimate
from satrl.config import load_preset
from satrl.cost import SaturatedCost
from satrl.lqr_oracle import LinearPlant, are_residual, solve_are
from satrl.simulator import build_loop_params, make_sum_of_sines, run_experiment, simulate_policy


def _report(label: str, ok: bool, detail: str = ""):
    tail = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'}{tail}")


# -- 1: linear-case weight convergence ----------------------------------------


def test_criterion_1_case1_weight_convergence(case1_result, case1_reference):
    w_err = np.max(np.abs(case1_result.final_w - case1_reference))
    gap = np.max(np.abs(case1_result.final_wa2 - case1_result.final_w[3:]))
    runtime = case1_result.summary["wall_time_s"]
    ok = w_err <= 0.05 and gap <= 0.02 and runtime <= 60.0
    _report(
        "1 case1 weight convergence",
        ok,
        f"max|W-W*|={w_err:.4f} tol 0.05, max|wa2-wa1|={gap:.2e} tol 0.02, "
        f"runtime={runtime:.1f}s limit 60s",
    )
    assert w_err <= 0.05
    assert gap <= 0.02
    assert runtime <= 60.0


# -- 2: Riccati oracle correctness ---------------------------------------------


def test_criterion_2a_are_oracle(case1_plant, case1_p, case1_reference):
    residual = np.max(np.abs(are_residual(case1_plant, case1_p)))
    scalar = solve_are(LinearPlant(a=[[-1.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]]))[0, 0]
    scalar_err = abs(scalar - (np.sqrt(2.0) - 1.0))
    # the weight mapping reproduces the ARE-derived vector to 4 decimals
    derived = np.array(
        [
            case1_p[0, 0],
            2.0 * case1_p[0, 1],
            case1_p[1, 1],
            *(-np.linalg.solve(case1_plant.r, case1_plant.b.T @ case1_p)[0]),
        ]
    )
    map_err = np.max(np.abs(case1_reference - derived))
    ok = residual <= 1e-10 and scalar_err <= 1e-10 and map_err <= 5e-5
    _report(
        "2a ARE oracle",
        ok,
        f"residual={residual:.1e}, scalar err={scalar_err:.1e}, "
        f"mapping err={map_err:.1e}",
    )
    assert residual <= 1e-10
    assert scalar_err <= 1e-10
    assert map_err <= 5e-5


def test_criterion_2b_published_reference_vector(case1_reference):
    """Expected to fail: the published vector's second component is a typo.

    The exact Riccati solution of this plant has 2*P12 = -0.19149 (so -0.1915
    at 4 decimals), independently confirmed by scipy's solver (residual
    ~1e-16).  The published vector prints -0.1904 while simultaneously
    printing the gain (-1.6601, -0.0577), which equals B'P only with
    P12 = -0.09575; the vector and the gain cannot both be right, and the
    gain (plus both independent solvers) says the vector is the wrong one.
    This check keeps the literal 4-decimal comparison so the discrepancy is
    visible rather than silently absorbed.
    """
    published = np.array([0.8779, -0.1904, 0.2492, -1.6601, -0.0577])
    err = np.abs(case1_reference - published)
    ok = bool(np.max(err) <= 5e-5)
    _report(
        "2b published reference vector to 4 decimals",
        ok,
        f"per-component err={np.array2string(err, precision=6)}; "
        "component 2 is a known erratum in the published vector "
        "(2*P12 = -0.19149, not -0.1904)",
    )
    assert ok, (
        "published vector disagrees with the exact Riccati solution on "
        f"component 2: exact 2*P12 = {case1_reference[1]:.5f}, published -0.1904; "
        "the published gain (-1.6601, -0.0577) is only consistent with the "
        "exact value, so this is an upstream erratum, not an oracle bug"
    )


# -- 3: saturated cost closed form vs quadrature ---------------------------------


def test_criterion_3_cost_closed_form_vs_quadrature():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        lam = rng.uniform(0.1, 50.0)
        r = rng.uniform(0.05, 10.0)
        u = rng.uniform(-0.999, 0.999) * lam
        cost = SaturatedCost(np.eye(2), [r], lam)
        worst = max(worst, abs(cost.input_cost([u]) - cost.input_cost_quadrature([u])))
    lam, r = 0.5, 2.0
    endpoint = SaturatedCost(np.eye(2), [r], lam).input_cost([lam])
    endpoint_err = abs(endpoint - 2.0 * lam * lam * r * np.log(2.0))
    ok = worst <= 1e-8 and endpoint_err <= 1e-12
    _report(
        "3 saturated cost vs quadrature",
        ok,
        f"worst |closed-quad|={worst:.2e} tol 1e-8, endpoint err={endpoint_err:.1e}",
    )
    assert worst <= 1e-8
    assert endpoint_err <= 1e-12


# -- 4: interval residual vanishes at integrator order ----------------------------


def _interval_residual_for_step(cfg, reference, h):
    """Max |E(W*)| over one second with weights pinned at the oracle values.

    Measurement conditions: tiny state and a fast, small exploration signal,
    so the intrinsic saturation bias (O(amplitude^4), step-independent) sits
    far below the integrator's truncation error and the h-scaling of the
    quadrature is observable.
    """
    model = cfg.build_model()
    basis_c, basis_a = cfg.build_bases(model)
    cost = cfg.build_cost()
    learner_cfg = cfg.build_learner(basis_a, model.m)
    rng = np.random.default_rng(0)
    exploration = make_sum_of_sines(100, (200.0, 500.0), rng, m=1, scale=0.02, t_off=1e9)
    params = build_loop_params(
        model, basis_c, basis_a, cost, learner_cfg, exploration,
        h=h, t_final=1.0, x0=[0.01, 0.01], x_max=1e6, max_resets=0,
        reset_draw=lambda: np.zeros(2),
        w0=reference.copy(), wa2_0=reference[3:].copy(),
    )
    params.alpha1 = 0.0  # pin the weights: measure the residual, not learning
    params.alpha2 = 0.0
    out = get_engine("python").run_loop(params)
    errors = out["delta_hist"] @ reference + out["rho_hist"]
    return float(np.max(np.abs(errors)))


def test_criterion_4_residual_order(case1_reference):
    cfg = load_preset("case1")
    steps = (1e-3, 5e-4, 2.5e-4)
    errs = [_interval_residual_for_step(cfg, case1_reference, h) for h in steps]
    order = float(np.polyfit(np.log(steps), np.log(errs), 1)[0])
    ok = order >= 3.5
    _report(
        "4 interval residual order",
        ok,
        f"|E|={['%.2e' % e for e in errs]} at h={list(steps)}, fitted order={order:.2f} >= 3.5",
    )
    assert order >= 3.5


# -- 5: state-dependent-gain case properties ---------------------------------------


def test_criterion_5_case2_properties(case2_result):
    res = case2_result
    cfg = res.config
    total_input = np.abs(res.traj_u + res.traj_e)
    max_input = float(np.max(total_input))
    trailing = res.summary["trailing_mean_normalized_bellman"]
    model = cfg.build_model()
    basis_c, basis_a = cfg.build_bases(model)
    cost = cfg.build_cost()
    roll = simulate_policy(
        model, basis_c, basis_a, cost,
        res.final_w, res.final_wa2.reshape(res.n_a, res.m),
        x0=[1.0, 1.0], horizon=20.0,
    )
    final_norm = float(np.linalg.norm(roll["final_x"]))
    # basis_c term [0, 2] is the x2^2 coefficient
    idx_x2sq = cfg.basis_c.index([0, 2])
    coeff = float(res.final_w[idx_x2sq])
    ok = (
        max_input <= 0.5
        and trailing < 1e-2
        and final_norm <= 0.05
        and 0.7 <= coeff <= 1.3
    )
    _report(
        "5 case2 properties",
        ok,
        f"max|u+e|={max_input:.4f}<=0.5, trailing |E|/(1+d'd)={trailing:.2e}<1e-2, "
        f"|x(20s)| from (1,1)={final_norm:.2e}<=0.05, x2^2 coeff={coeff:.4f} in [0.7,1.3]",
    )
    assert max_input <= 0.5
    assert trailing < 1e-2
    assert final_norm <= 0.05
    assert 0.7 <= coeff <= 1.3


# -- 6: invariant spot-checks --------------------------------------------------------
# (each invariant has a full test in its module's suite; this aggregates
# one representative check per invariant so the gate is self-contained)


def test_criterion_6_invariant_suite(case1_reference):
    from satrl.approximator import flatten
    from satrl.basis import BasisSet
    from satrl.learner import LearnerConfig, RegressorSample, bellman_error, critic_update

    checks = {}

    # flattening identity, exact
    rng = np.random.default_rng(1)
    w = rng.normal(size=(3, 2))
    phi, re = rng.normal(size=3), rng.normal(size=2)
    checks["flatten identity"] = abs(
        flatten(w) @ np.kron(phi, re) - (w.T @ phi) @ re
    ) < 1e-13

    # basis jacobian vs central differences
    basis = BasisSet(2, [[2, 0], [1, 1], [0, 2], [3, 1]])
    x = np.array([0.7, -1.2])
    jac = basis.jacobian(x)
    eps = 1e-6
    fd = np.column_stack(
        [
            (basis.eval(x + e) - basis.eval(x - e)) / (2 * eps)
            for e in (np.array([eps, 0.0]), np.array([0.0, eps]))
        ]
    )
    checks["jacobian vs finite differences"] = np.allclose(jac, fd, atol=1e-5)

    # critic step-direction monotonicity in the stable regime
    lc = LearnerConfig(alpha1=50.0, alpha2=1.0, y_matrix=np.eye(1), interval=0.01)
    s = RegressorSample(delta=np.array([1.0, -0.5]), rho=0.3, t_start=0.0, t_end=0.01)
    w0 = np.array([0.4, 0.2])
    w1 = critic_update(w0, s, lc, dt=0.01)
    checks["critic step contracts |E|"] = abs(bellman_error(w1, s)) <= abs(
        bellman_error(w0, s)
    )

    # actor leakage contraction with zero data term
    from satrl.cost import SaturatedCost as SC
    from satrl.learner import actor_update

    lc2 = LearnerConfig(alpha1=1.0, alpha2=10.0, y_matrix=0.01 * np.eye(2), interval=0.01)
    ba = BasisSet(2, [[1, 0], [0, 1]])
    cost = SC(np.eye(2), [1.0], 1.0)
    wa = np.array([[1.5], [-0.5]])
    out = actor_update(wa, np.zeros(1), ba, cost, [0.1, 0.1], lc2, dt=0.01)
    checks["actor leakage contracts"] = np.all(np.abs(out) < np.abs(wa))

    # determinism: bit-identical reruns
    cfg = load_preset("case1")
    cfg.sim["t_final"] = 0.5
    r1, r2 = run_experiment(cfg), run_experiment(cfg)
    checks["bit-identical reruns"] = np.array_equal(r1.weights_hist, r2.weights_hist)

    # interval-cost accumulator consistency: summed interval rho over a
    # frozen-policy rollout equals the independently integrated running cost
    model = cfg.build_model()
    basis_c, basis_a = cfg.build_bases(model)
    cost1 = cfg.build_cost()
    wa2 = case1_reference[3:].reshape(2, 1)
    roll = simulate_policy(
        model, basis_c, basis_a, cost1, case1_reference, wa2, [1.0, 1.0], 2.0
    )
    from satrl.dynamics import AugmentedState, rk4_step

    aug = AugmentedState(x=np.array([1.0, 1.0]))
    t = 0.0
    for _ in range(2000):
        aug = rk4_step(
            model, aug,
            lambda x: policy_estimate(wa2, basis_a, cost1, x),
            lambda tau: np.zeros(1), t, 1e-3, cost1, basis_a,
        )
        t += 1e-3
    rel = abs(roll["total_cost"] - aug.rho_acc) / aug.rho_acc
    checks["accumulator consistency"] = rel <= 1e-8

    # integrator order (reuses the dynamics-module check in brief)
    from scipy.linalg import expm

    a = np.array([[1.0, 0.0], [0.0, -2.0]])
    exact = expm(a) @ np.array([1.0, 1.0])
    errs = []
    for h in (0.1, 0.05):
        y = np.array([1.0, 1.0])
        for _ in range(int(round(1.0 / h))):
            k1 = a @ y
            k2 = a @ (y + 0.5 * h * k1)
            k3 = a @ (y + 0.5 * h * k2)
            k4 = a @ (y + h * k3)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        errs.append(np.linalg.norm(y - exact))
    checks["integrator 4th order"] = errs[0] / errs[1] > 12.0

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    _report("6 invariant suite", ok, "all invariants hold" if ok else f"failed: {failed}")
    assert ok, f"failed invariants: {failed}"


# -- 7: ultimate boundedness of both preset runs ----------------------------------


def _uub_check(result):
    cfg = result.config
    bound = float(cfg.uub["state_bound"])
    drift_tol = float(cfg.uub["weight_drift"])
    tail_state = result.summary["trailing_max_state_norm"]
    finite = (
        np.all(np.isfinite(result.weights_hist))
        and np.all(np.isfinite(result.traj_x))
        and np.all(np.isfinite(result.traj_u))
    )
    # weight norms over the trailing window stay within +-drift_tol (relative)
    # of their value when exploration was removed
    t_off = cfg.t_off
    times = np.concatenate([[0.0], result.bound_t])
    at_off = np.linalg.norm(result.weights_hist[np.searchsorted(times, t_off)])
    tail = result.weights_hist[times >= cfg.t_final - float(cfg.uub["window"])]
    tail_norms = np.linalg.norm(tail, axis=1)
    drift = float(np.max(np.abs(tail_norms - at_off))) / at_off
    return tail_state, bound, finite, drift, drift_tol


def test_criterion_7_uub(case1_result, case2_result):
    rows = []
    ok = True
    for name, res in (("case1", case1_result), ("case2", case2_result)):
        tail_state, bound, finite, drift, drift_tol = _uub_check(res)
        good = tail_state <= bound and finite and drift <= drift_tol
        ok = ok and good
        rows.append(
            f"{name}: tail |x|={tail_state:.3f}<={bound}, finite={finite}, "
            f"weight drift={drift:.2e}<={drift_tol}"
        )
    _report("7 ultimate boundedness", ok, "; ".join(rows))
    for name, res in (("case1", case1_result), ("case2", case2_result)):
        tail_state, bound, finite, drift, drift_tol = _uub_check(res)
        assert tail_state <= bound, name
        assert finite, name
        assert drift <= drift_tol, name
