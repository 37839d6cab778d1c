import math

import numpy as np
import pytest

from onesfw import diagnostics as diag
from onesfw import estimators as est
from onesfw.constraints import Box, BudgetedBox, L1Ball, UnitSimplex
from onesfw.errors import CapabilityError, InvalidInputError
from onesfw.oracles import (
    concave_nqp,
    finite_sum_logistic,
    nonconvex_sigmoid_sum,
    oblivious_quadratic,
    smoothed_multilinear,
)
from onesfw.solvers import (
    ALGORITHMS,
    TRACE_FIELDS,
    Mode,
    SolverConfig,
    rho_schedule,
    run,
    run_deterministic_fw,
    run_momentum_fw,
    run_oblivious_one_sfw,
    run_one_sfw,
)


def quad(noise=1.0, dim=6):
    return oblivious_quadratic(dim, noise=noise, data_seed=2), UnitSimplex(dim)


def test_rho_schedule_examples():
    assert rho_schedule(2, 0.3) == 1.0
    assert rho_schedule(5, 2 / 3) == pytest.approx(0.39685, abs=1e-5)
    assert rho_schedule(101, 1.0) == pytest.approx(0.01)


@pytest.mark.parametrize("t,alpha", [(1, 1.0), (0, 0.5), (3, 0.0), (3, 1.5)])
def test_rho_schedule_rejects(t, alpha):
    with pytest.raises(InvalidInputError):
        rho_schedule(t, alpha)


def test_mode_defaults():
    c = SolverConfig(T=8, mode="convex_min")
    assert c.alpha == 1.0 and c.eta_at(4) == 0.25
    c = SolverConfig(T=8, mode="nonconvex_min")
    assert c.alpha == pytest.approx(2 / 3) and c.eta_at(1) == pytest.approx(8 ** (-2 / 3))
    c = SolverConfig(T=8, mode="submodular_max")
    assert c.alpha == 1.0 and c.eta_at(3) == 0.125
    assert SolverConfig(T=8, alpha=0.5, eta="power").eta_at(4) == 0.5
    assert SolverConfig(T=8, eta=0.2).eta_at(4) == 0.2
    assert SolverConfig(T=8, eta=lambda t, T: 1 / (t + T)).eta_at(2) == 0.1


@pytest.mark.parametrize("kwargs", [dict(T=0), dict(T=5, alpha=0.0), dict(T=5, alpha=1.2),
                                    dict(T=5, mode="maximin"), dict(T=5, delta_fixed=0.0),
                                    dict(T=5, delta_option="secant")])
def test_config_rejects(kwargs):
    with pytest.raises(InvalidInputError):
        SolverConfig(**kwargs)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_horizon_one(algorithm):
    oracle, K = quad()
    res = run(algorithm, oracle, K, SolverConfig(T=1, seed=4))
    # eta_1 = 1 lands exactly on the first vertex
    np.testing.assert_array_equal(res.x_final, K.lmo(res.d_final))
    assert res.oracle_queries == 1 and len(res.trace) == 1


def test_oblivious_and_general_agree_at_horizon_one():
    oracle, K = quad()
    a = run_one_sfw(oracle, K, SolverConfig(T=1, seed=9))
    b = run_oblivious_one_sfw(oracle, K, SolverConfig(T=1, seed=9))
    np.testing.assert_array_equal(a.x_final, b.x_final)


def feasibility_cases():
    return [
        (quad()[0], quad()[1], "convex_min", "one_sfw", "exact_hessian"),
        (finite_sum_logistic(n=40, dim=5), L1Ball(5, 2.0), "convex_min", "oblivious_one_sfw",
         "exact_hessian"),
        (nonconvex_sigmoid_sum(n=40, dim=5), L1Ball(5, 1.0), "nonconvex_min", "one_sfw",
         "gradient_difference"),
        (concave_nqp(4), BudgetedBox(np.ones(4), 1.5), "submodular_max", "momentum_fw", "exact_hessian"),
        (smoothed_multilinear(4), BudgetedBox(np.ones(4), 2.0), "submodular_max", "one_sfw",
         "gradient_difference"),
        (smoothed_multilinear(3), Box(np.zeros(3), np.ones(3)), "submodular_max", "one_sfw",
         "exact_hessian"),
    ]


@pytest.mark.parametrize("case", range(6))
def test_feasibility_and_queries(case):
    oracle, K, mode, algorithm, option = feasibility_cases()[case]
    before = oracle.queries
    res = run(algorithm, oracle, K, SolverConfig(T=150, mode=mode, delta_option=option, seed=case))
    assert all(K.contains(x, 1e-9) for x in res.iterates)
    assert res.oracle_queries == 150 and oracle.queries - before == 150
    assert any(np.array_equal(res.x_o, x) for x in res.iterates[:-1])


def test_submodular_final_point_is_vertex_average():
    oracle, K = concave_nqp(4), BudgetedBox(np.ones(4), 1.5)
    T = 40
    res = run_one_sfw(oracle, K, SolverConfig(T=T, mode="submodular_max", seed=3))
    steps = np.diff(res.iterates, axis=0) * T
    verts = K.vertices()
    for v in steps:
        assert np.min(np.linalg.norm(verts - v, axis=1)) <= 1e-9
    np.testing.assert_allclose(res.x_final, steps.mean(axis=0), atol=1e-12)


def test_submodular_requires_origin():
    oracle = concave_nqp(3)
    with pytest.raises(InvalidInputError):
        run_one_sfw(oracle, BudgetedBox(np.ones(3), 1.0),
                    SolverConfig(T=5, mode="submodular_max", x1=np.full(3, 0.1)))
    with pytest.raises(InvalidInputError):
        run_one_sfw(oracle, UnitSimplex(3), SolverConfig(T=5, mode="submodular_max"))


def test_rejects_infeasible_start_and_dimension_mismatch():
    oracle, K = quad()
    with pytest.raises(InvalidInputError):
        run_one_sfw(oracle, K, SolverConfig(T=5, x1=np.ones(6)))
    with pytest.raises(InvalidInputError):
        run_one_sfw(oracle, UnitSimplex(3), SolverConfig(T=5))


def test_capability_mismatches():
    sm, K = smoothed_multilinear(3), Box(np.zeros(3), np.ones(3))
    with pytest.raises(CapabilityError):
        run_oblivious_one_sfw(sm, K, SolverConfig(T=3, mode="submodular_max"))
    with pytest.raises(CapabilityError):
        run_one_sfw(sm, K, SolverConfig(T=3, mode="submodular_max", delta_option="oblivious_difference"))
    oracle, K2 = quad()
    with pytest.raises(InvalidInputError):
        run_one_sfw(oracle, K2, SolverConfig(T=3, delta_option="oblivious_difference"))
    with pytest.raises(InvalidInputError):
        run("frank_wolfe_deluxe", oracle, K2, SolverConfig(T=3))


def test_schedule_conformance():
    oracle, K = nonconvex_sigmoid_sum(n=30, dim=4), L1Ball(4, 1.0)
    T = 50
    cfg = SolverConfig(T=T, mode="nonconvex_min", delta_option="gradient_difference", seed=1)
    res = run_one_sfw(oracle, K, cfg)
    c = oracle.constants(K)
    tr = res.trace
    assert math.isnan(tr["rho"][0]) and math.isnan(tr["delta"][0])
    for t in (2, 10, T):
        assert tr["rho"][t - 1] == (t - 1) ** (-2 / 3)
        assert tr["eta"][t - 1] == T ** (-2 / 3)
        assert tr["delta"][t - 1] == est.default_delta_step(cfg.eta_at(t - 1), c.Lbar, K.diameter(),
                                                            c.L2, c.B)
    assert tr["queries"][-1] == T and len(tr) == T
    np.testing.assert_array_equal(tr["t"], np.arange(1, T + 1))


def test_fixed_delta_override():
    oracle, K = nonconvex_sigmoid_sum(n=30, dim=4), L1Ball(4, 1.0)
    res = run_one_sfw(oracle, K, SolverConfig(T=5, delta_option="gradient_difference", delta_fixed=0.01))
    assert np.all(res.trace["delta"][1:] == 0.01)


def test_trace_optional_fields():
    oracle, K = quad()
    bare = run_one_sfw(oracle, K, SolverConfig(T=20, seed=1))
    assert not any(bare.trace.has(f) for f in ("F", "subopt", "fw_gap", "grad_err_sq"))
    f_star = diag.brute_force_opt(oracle, K, "convex_min").value
    full = run_one_sfw(oracle, K, SolverConfig(T=20, seed=1, record_exact_diagnostics=True, f_star=f_star))
    assert all(full.trace.has(f) for f in ("F", "subopt", "fw_gap", "grad_err_sq"))
    assert np.all(full.trace["subopt"] >= -1e-12) and np.all(full.trace["fw_gap"] >= -1e-12)
    # diagnostics never consume randomness
    np.testing.assert_array_equal(bare.iterates, full.iterates)
    assert set(TRACE_FIELDS) == set(full.trace.columns)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_determinism(algorithm):
    oracle, K = quad()
    a = run(algorithm, oracle, K, SolverConfig(T=200, seed=77, record_exact_diagnostics=True))
    b = run(algorithm, oracle, K, SolverConfig(T=200, seed=77, record_exact_diagnostics=True))
    np.testing.assert_array_equal(a.iterates, b.iterates)
    np.testing.assert_array_equal(a.x_o, b.x_o)
    for f in TRACE_FIELDS:
        np.testing.assert_array_equal(a.trace[f], b.trace[f])


def test_zero_noise_matches_deterministic_fw():
    oracle, K = quad(noise=0.0, dim=8)
    cfg = SolverConfig(T=400, seed=3)
    ref = run_deterministic_fw(oracle.exact_grad, K, cfg)
    for algorithm, option in (("one_sfw", "exact_hessian"), ("one_sfw", "gradient_difference"),
                              ("oblivious_one_sfw", "exact_hessian")):
        res = run(algorithm, oracle, K, SolverConfig(T=400, seed=3, delta_option=option))
        np.testing.assert_array_equal(res.iterates, ref)
    ref_m = run_deterministic_fw(oracle.exact_grad, K, cfg, rho_exponent=2 / 3)
    np.testing.assert_array_equal(run_momentum_fw(oracle, K, cfg).iterates, ref_m)


def test_momentum_with_unit_weight_uses_latest_gradient():
    oracle, K = quad()
    cfg = SolverConfig(T=30, seed=5, momentum_rho_exponent=0.0)
    res = run_momentum_fw(oracle, K, cfg)
    # rebuild the run: with rho = 1 the surrogate is the last stochastic gradient
    rng = np.random.default_rng(5)
    x = K.default_point()
    for t in range(1, 31):
        z = oracle.sample(x, rng)
        x = x + (1 / t) * (K.lmo(oracle.grad(x, z)) - x)
    np.testing.assert_allclose(res.x_final, x, atol=1e-15)


def test_seed_accepts_generator():
    oracle, K = quad()
    a = run_one_sfw(oracle, K, SolverConfig(T=50, seed=np.random.default_rng(8)))
    b = run_one_sfw(oracle, K, SolverConfig(T=50, seed=8))
    np.testing.assert_array_equal(a.iterates, b.iterates)


def test_one_sfw_beats_momentum_in_paired_runs():
    oracle = oblivious_quadratic(10, rank=1, noise=2.0, tilt=0.1, data_seed=0)
    K = UnitSimplex(10)
    f_star = diag.brute_force_opt(oracle, K, "convex_min").value
    wins = 0
    for seed in range(50):
        a = run_one_sfw(oracle, K, SolverConfig(T=10000, seed=seed))
        b = run_momentum_fw(oracle, K, SolverConfig(T=10000, seed=seed))
        wins += oracle.exact_value(a.x_final) - f_star < oracle.exact_value(b.x_final) - f_star
    assert wins >= 40


def test_mode_parse():
    assert Mode.parse("Convex_Min") is Mode.CONVEX_MIN
    assert Mode.SUBMODULAR_MAX.sense == "maximize"
