"""Riccati oracle: Kleinman-Newton solver, weight mapping, HJB diagnostics."""

import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from satrl.basis import BasisSet
from satrl.cost import SaturatedCost
from satrl.errors import ConfigError, OracleError
from satrl.lqr_oracle import (
    LinearPlant,
    are_residual,
    lqr_gain,
    lqr_reference_weights,
    reconstruct_p,
    solve_are,
    solve_lyapunov,
    verify_hjb_residual,
)


def test_scalar_closed_form():
    plant = LinearPlant(a=[[-1.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]])
    p = solve_are(plant)
    assert p[0, 0] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-10)


def test_case1_matches_independent_solver(case1_plant, case1_p):
    p_ref = solve_continuous_are(
        case1_plant.a, case1_plant.b, case1_plant.q, case1_plant.r
    )
    np.testing.assert_allclose(case1_p, p_ref, atol=1e-10)
    assert np.max(np.abs(are_residual(case1_plant, case1_p))) <= 1e-10
    # solution is symmetric positive definite
    np.testing.assert_allclose(case1_p, case1_p.T)
    assert np.all(np.linalg.eigvalsh(case1_p) > 0)


def test_zero_cost_gives_zero_value():
    plant = LinearPlant(
        a=[[-1.0, 0.0], [0.0, -2.0]], b=[[1.0], [1.0]],
        q=np.zeros((2, 2)), r=[[1.0]],
    )
    np.testing.assert_allclose(solve_are(plant), np.zeros((2, 2)), atol=1e-10)


def test_non_stabilizable_plant_raises():
    plant = LinearPlant(a=[[1.0]], b=[[0.0]], q=[[1.0]], r=[[1.0]])
    with pytest.raises(OracleError):
        solve_are(plant)


def test_lyapunov_solve_direct():
    a_cl = np.array([[-1.0, 0.5], [0.0, -2.0]])
    rhs = np.eye(2)
    p = solve_lyapunov(a_cl, rhs)
    np.testing.assert_allclose(a_cl.T @ p + p @ a_cl, -rhs, atol=1e-12)


def test_reference_weight_mapping(case1_plant, case1_p, case1_reference):
    # w_c = (P11, 2*P12, P22); w_a rows = -gain columns
    p, w = case1_p, case1_reference
    gain = lqr_gain(case1_plant, p)
    np.testing.assert_allclose(
        w, [p[0, 0], 2.0 * p[0, 1], p[1, 1], -gain[0, 0], -gain[0, 1]], atol=1e-13
    )


def test_scalar_reference_weights():
    plant = LinearPlant(a=[[-1.0]], b=[[1.0]], q=[[1.0]], r=[[1.0]])
    basis_c = BasisSet(1, [[2]])
    basis_a = BasisSet(1, [[1]])
    w = lqr_reference_weights(plant, basis_c, basis_a)
    root = np.sqrt(2.0) - 1.0
    np.testing.assert_allclose(w, [root, -root], atol=1e-10)


def test_reference_weights_reject_non_quadratic_basis(case1_plant):
    cubic = BasisSet(2, [[2, 0], [1, 1], [0, 3]])
    linear = BasisSet(2, [[1, 0], [0, 1]])
    with pytest.raises(ConfigError):
        lqr_reference_weights(case1_plant, cubic, linear)
    quad = BasisSet(2, [[2, 0], [1, 1], [0, 2]])
    not_linear = BasisSet(2, [[1, 0], [1, 1]])
    with pytest.raises(ConfigError):
        lqr_reference_weights(case1_plant, quad, not_linear)


def test_reconstruct_p_roundtrip(case1_p):
    basis_c = BasisSet(2, [[2, 0], [1, 1], [0, 2]])
    w_c = [case1_p[0, 0], 2.0 * case1_p[0, 1], case1_p[1, 1]]
    np.testing.assert_allclose(reconstruct_p(w_c, basis_c, 2), case1_p, atol=1e-15)


def test_hjb_residual_small_for_oracle_weights(case1_plant, case1_reference):
    # at lam=30 the saturation distortion over [-1,1]^2 is tiny, so the
    # quadratic value function nearly solves the constrained equation too
    cfg_basis_c = BasisSet(2, [[2, 0], [1, 1], [0, 2]])
    cfg_basis_a = BasisSet(2, [[1, 0], [0, 1]])
    cost = SaturatedCost(np.eye(2), [1.0], 30.0)
    from satrl.dynamics import linear_model

    model = linear_model(case1_plant.a, case1_plant.b)
    rng = np.random.default_rng(2)
    states = rng.uniform(-1.0, 1.0, size=(100, 2))
    w_c = case1_reference[:3]
    w_a2 = case1_reference[3:].reshape(2, 1)
    stats = verify_hjb_residual(
        w_c, w_a2, model, cfg_basis_c, cfg_basis_a, cost, states
    )
    assert stats["max_abs"] <= 2e-3
    assert stats["mean_abs"] <= stats["max_abs"]


def test_hjb_residual_zero_weights_at_origin(case1_plant):
    basis_c = BasisSet(2, [[2, 0], [1, 1], [0, 2]])
    basis_a = BasisSet(2, [[1, 0], [0, 1]])
    cost = SaturatedCost(np.eye(2), [1.0], 30.0)
    from satrl.dynamics import linear_model

    model = linear_model(case1_plant.a, case1_plant.b)
    stats = verify_hjb_residual(
        np.zeros(3), np.zeros((2, 1)), model, basis_c, basis_a, cost, [[0.0, 0.0]]
    )
    assert stats["max_abs"] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "kw",
    [
        dict(a=[[1.0, 0.0]], b=[[1.0], [1.0]], q=np.eye(2), r=[[1.0]]),
        dict(a=np.eye(2), b=[[1.0], [1.0]], q=[[1.0, 1.0], [0.0, 1.0]], r=[[1.0]]),
        dict(a=np.eye(2), b=[[1.0], [1.0]], q=np.eye(2), r=[[-1.0]]),
    ],
)
def test_invalid_plants_rejected(kw):
    with pytest.raises(ConfigError):
        LinearPlant(**kw)
