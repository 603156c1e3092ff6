"""Shared fixtures: full preset runs are expensive, so they are session-scoped
and reused by the acceptance gate and any unit test that needs a real run."""

import time

import numpy as np
import pytest

from satrl import load_preset, run_experiment
from satrl.lqr_oracle import LinearPlant, lqr_reference_weights, solve_are


@pytest.fixture(scope="session")
def case1_plant():
    cfg = load_preset("case1")
    return LinearPlant(
        a=cfg.model["A"],
        b=cfg.model["B"],
        q=np.asarray(cfg.cost["Q"], dtype=float),
        r=np.diag(cfg.cost["r_diag"]),
    )


@pytest.fixture(scope="session")
def case1_reference(case1_plant):
    cfg = load_preset("case1")
    model = cfg.build_model()
    basis_c, basis_a = cfg.build_bases(model)
    return lqr_reference_weights(case1_plant, basis_c, basis_a)


@pytest.fixture(scope="session")
def case1_p(case1_plant):
    return solve_are(case1_plant)


@pytest.fixture(scope="session")
def case1_result():
    t0 = time.perf_counter()
    result = run_experiment(load_preset("case1"))
    result.summary["wall_time_s"] = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def case2_result():
    t0 = time.perf_counter()
    result = run_experiment(load_preset("case2"))
    result.summary["wall_time_s"] = time.perf_counter() - t0
    return result
