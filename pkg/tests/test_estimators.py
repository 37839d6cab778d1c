import itertools
import math

import numpy as np
import pytest

from onesfw import diagnostics as diag
from onesfw import estimators as est
from onesfw.constraints import L1Ball
from onesfw.errors import CapabilityError, InvalidInputError
from onesfw.estimators import DeltaOption, EstimatorState, MixPoint
from onesfw.oracles import (
    SmoothedMultilinear,
    finite_sum_logistic,
    nonconvex_sigmoid_sum,
    oblivious_quadratic,
    smoothed_multilinear,
)


def enumerate_z(dim):
    return [np.array(b, dtype=np.int8) for b in itertools.product((0, 1), repeat=dim)]


def z_prob(oracle, x, z):
    p = oracle.smoothed(x)
    return float(np.prod(np.where(z == 1, p, 1 - p)))


def state_at(x_prev, d=None):
    return EstimatorState(np.zeros_like(x_prev) if d is None else d, x_prev, 2)


# --- Hessian estimate ---------------------------------------------------------


def test_hessian_estimate_reduces_for_oblivious(rng):
    oracle = oblivious_quadratic(4, noise=1.0)
    x, u = rng.normal(size=4), rng.normal(size=4)
    z = oracle.sample(np.zeros(4), rng)
    np.testing.assert_allclose(est.hessian_estimate_vecprod(oracle, x, z, u), oracle.A @ u)


def test_hessian_estimate_one_dimensional_example():
    oracle = SmoothedMultilinear(np.array([0.0, 1.0]), xi=0.25)
    x, u = np.array([0.5]), np.array([1.0])
    assert est.hessian_estimate_vecprod(oracle, x, np.array([0]), u)[0] == pytest.approx(0.0)
    assert est.hessian_estimate_vecprod(oracle, x, np.array([1]), u)[0] == pytest.approx(0.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_hessian_estimate_unbiased(dim, rng):
    oracle = smoothed_multilinear(dim, data_seed=dim)
    for _ in range(100):
        x, u = rng.random(dim), rng.normal(size=dim)
        mean = sum(z_prob(oracle, x, z) * est.hessian_estimate_vecprod(oracle, x, z, u)
                   for z in enumerate_z(dim))
        assert np.max(np.abs(mean - oracle.exact_hess(x) @ u)) <= 1e-9


# --- finite differences -------------------------------------------------------


def test_fd_hvp_exact_on_quadratics(rng):
    A = rng.normal(size=(4, 4))
    A = A @ A.T
    for delta in (1e-1, 1e-3, 1.0):
        x, u = rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_allclose(est.fd_hvp(lambda y: A @ y, x, u, delta), A @ u, rtol=1e-9, atol=1e-9)


def test_fd_hvp_cubic_example():
    phi = est.fd_hvp(lambda y: 3 * y**2, np.array([1.0, 1.0]), np.array([1.0, 0.0]), 0.1)
    np.testing.assert_allclose(phi, [6.0, 0.0], atol=1e-12)


def test_fd_hvp_quartic_error_bound(rng):
    L2, D = 24.0, 2.0
    for delta in (1e-1, 1e-2, 1e-3, 1e-4):
        for _ in range(50):
            x = rng.normal(size=3)
            x *= rng.random() / np.linalg.norm(x)
            u = rng.normal(size=3)
            u *= D * rng.random() / np.linalg.norm(u)
            err = np.linalg.norm(est.fd_hvp(lambda y: 4 * y**3, x, u, delta) - 12 * x**2 * u)
            assert err <= D**2 * L2 * delta


@pytest.mark.parametrize("delta", [0.0, -1e-3])
def test_fd_hvp_rejects_nonpositive_step(delta):
    with pytest.raises(InvalidInputError):
        est.fd_hvp(lambda y: y, np.zeros(2), np.ones(2), delta)


# --- gradient variation -------------------------------------------------------


def test_delta_exact_zero_when_not_moving(rng):
    oracle = smoothed_multilinear(3)
    x = rng.random(3)
    mix = est.mix_point(x, x, rng)
    z = oracle.sample(mix.x_mid, rng)
    assert not np.any(est.delta_exact(oracle, x, state_at(x), mix, z))


def test_delta_exact_on_quadratic_is_gradient_change(rng):
    oracle = oblivious_quadratic(4, noise=0.0)
    x_prev, x_t = rng.random(4), rng.random(4)
    mix = est.mix_point(x_t, x_prev, rng)
    z = oracle.sample(mix.x_mid, rng)
    d = est.delta_exact(oracle, x_t, state_at(x_prev), mix, z)
    np.testing.assert_allclose(d, oracle.exact_grad(x_t) - oracle.exact_grad(x_prev), atol=1e-12)


def test_delta_exact_unbiased_by_quadrature(rng):
    nodes = np.linspace(0, 1, 21)
    w = np.full(21, 1 / 20)
    w[[0, -1]] /= 2
    for dim in (1, 2, 3):
        oracle = smoothed_multilinear(dim, data_seed=7 + dim)
        x_prev, x_t = rng.random(dim), rng.random(dim)
        mean = np.zeros(dim)
        for a, wa in zip(nodes, w):
            mix = MixPoint(a, a * x_t + (1 - a) * x_prev)
            for z in enumerate_z(dim):
                mean += wa * z_prob(oracle, mix.x_mid, z) * est.delta_exact(
                    oracle, x_t, state_at(x_prev), mix, z)
        target = oracle.exact_grad(x_t) - oracle.exact_grad(x_prev)
        assert np.linalg.norm(mean - target) <= 1e-6


def test_mix_point_is_convex_combination(rng):
    x_t, x_prev = rng.random(3), rng.random(3)
    for _ in range(50):
        mix = est.mix_point(x_t, x_prev, rng)
        assert 0.0 <= mix.a <= 1.0
        np.testing.assert_allclose(mix.x_mid, mix.a * x_t + (1 - mix.a) * x_prev)


def test_graddiff_equals_exact_on_quadratic(rng):
    oracle = oblivious_quadratic(5, noise=1.0)
    x_prev, x_t = rng.random(5), rng.random(5)
    mix = est.mix_point(x_t, x_prev, rng)
    z = oracle.sample(mix.x_mid, rng)
    exact = est.delta_exact(oracle, x_t, state_at(x_prev), mix, z)
    for delta in (1e-1, 1e-4, 3.0):
        np.testing.assert_allclose(
            est.delta_graddiff(oracle, x_t, state_at(x_prev), mix, z, delta), exact, atol=1e-10)


def test_graddiff_error_bound_on_sigmoid(rng):
    oracle = nonconvex_sigmoid_sum(n=40, dim=6, data_seed=1)
    K = L1Ball(6, 1.0)
    c = oracle.constants(K)
    D = K.diameter()
    for _ in range(100):
        x_prev = K.lmo(rng.normal(size=6)) * rng.random()
        x_t = K.lmo(rng.normal(size=6)) * rng.random()
        mix = est.mix_point(x_t, x_prev, rng)
        z = oracle.sample(mix.x_mid, rng)
        delta = 10 ** rng.uniform(-4, -1)
        gap = np.linalg.norm(est.delta_graddiff(oracle, x_t, state_at(x_prev), mix, z, delta)
                             - est.delta_exact(oracle, x_t, state_at(x_prev), mix, z))
        assert gap <= D**2 * c.L2 * delta * (1 + c.B)


def test_graddiff_converges_as_step_shrinks(rng):
    oracle = smoothed_multilinear(3, data_seed=4)
    x_prev, x_t = rng.uniform(0.2, 0.8, 3), rng.uniform(0.2, 0.8, 3)
    mix = est.mix_point(x_t, x_prev, rng)
    z = oracle.sample(mix.x_mid, rng)
    exact = est.delta_exact(oracle, x_t, state_at(x_prev), mix, z)
    errs = [np.linalg.norm(est.delta_graddiff(oracle, x_t, state_at(x_prev), mix, z, d) - exact)
            for d in (1e-2, 1e-4, 1e-6)]
    assert errs[0] > errs[1] > errs[2] or errs[2] < 1e-8
    assert errs[-1] < 1e-6


def test_graddiff_rejects_nonpositive_step(rng):
    oracle = oblivious_quadratic(2)
    mix = MixPoint(0.5, np.zeros(2))
    with pytest.raises(InvalidInputError):
        est.delta_graddiff(oracle, np.ones(2), state_at(np.zeros(2)), mix, np.zeros(2), 0.0)


def test_delta_oblivious_examples(rng):
    oracle = oblivious_quadratic(4, noise=1.0)
    x_prev, x_t = rng.random(4), rng.random(4)
    z = oracle.sample(x_t, rng)
    np.testing.assert_allclose(est.delta_oblivious(oracle, x_t, x_prev, z), oracle.A @ (x_t - x_prev),
                               atol=1e-12)
    assert not np.any(est.delta_oblivious(oracle, x_t, x_t, z))
    fs = finite_sum_logistic(n=25, dim=4, data_seed=2)
    mean = np.mean([est.delta_oblivious(fs, x_t, x_prev, i) for i in range(fs.n)], axis=0)
    np.testing.assert_allclose(mean, fs.exact_grad(x_t) - fs.exact_grad(x_prev), atol=1e-12)


def test_delta_oblivious_rejects_non_oblivious():
    oracle = smoothed_multilinear(2)
    with pytest.raises(CapabilityError):
        est.delta_oblivious(oracle, np.zeros(2), np.zeros(2), np.zeros(2, dtype=np.int8))


def test_capability_checks():
    assert est.check_delta_option(oblivious_quadratic(2), "oblivious_difference") \
        is DeltaOption.OBLIVIOUS_DIFFERENCE
    with pytest.raises(CapabilityError):
        est.check_delta_option(smoothed_multilinear(2), "oblivious_difference")
    with pytest.raises(InvalidInputError):
        DeltaOption.parse("newton")


# --- recursions ---------------------------------------------------------------


def test_update_examples():
    s = EstimatorState(np.array([2.0, 0.0]), np.zeros(2), 3)
    np.testing.assert_allclose(est.update(s, 0.5, np.array([0.0, 2.0]), np.array([1.0, 1.0])).d, [1.5, 1.5])
    g = np.array([7.0, -1.0])
    np.testing.assert_array_equal(est.update(s, 1.0, np.ones(2), g).d, g)
    np.testing.assert_allclose(est.update(s, 0.0, np.ones(2), g).d, [3.0, 1.0])
    assert est.update(s, 0.3, np.ones(2), g).t == 4


def test_momentum_update_examples():
    s = EstimatorState(np.array([4.0, 0.0]), np.zeros(2), 1)
    np.testing.assert_allclose(est.momentum_update(s, 0.25, np.array([0.0, 4.0])).d, [3.0, 1.0])
    np.testing.assert_array_equal(est.momentum_update(s, 1.0, np.array([0.5, 0.5])).d, [0.5, 0.5])
    np.testing.assert_array_equal(est.momentum_update(s, 0.0, np.array([0.5, 0.5])).d, s.d)


@pytest.mark.parametrize("rho", [-0.1, 1.5, math.nan])
def test_updates_reject_bad_weights(rho):
    s = EstimatorState(np.zeros(2), np.zeros(2), 1)
    with pytest.raises(InvalidInputError):
        est.update(s, rho, np.zeros(2), np.zeros(2))
    with pytest.raises(InvalidInputError):
        est.momentum_update(s, rho, np.zeros(2))


def test_default_delta_step():
    step = est.default_delta_step(0.1, 2.0, 1.0, 3.0, 0.5)
    assert step == pytest.approx(math.sqrt(3) * 0.1 * 2.0 / (1.0 * 3.0 * 1.5))
    assert est.default_delta_step(0.1, 2.0, 1.0, 0.0, 0.5) == 1e-4


# --- unbiasedness of the surrogate along fixed paths --------------------------


def test_frozen_path_enumeration_finite_sum():
    oracle = finite_sum_logistic(n=2, dim=3, data_seed=8)
    path = [np.array([0.1, 0.2, -0.3]), np.array([0.4, -0.1, 0.0]), np.array([-0.2, 0.3, 0.5])]
    total = np.zeros(3)
    for seq in itertools.product(range(2), repeat=3):
        state = est.initial_state(oracle.grad(path[0], seq[0]), path[0])
        for t, (x, i) in enumerate(zip(path[1:], seq[1:]), start=2):
            delta = est.delta_oblivious(oracle, x, state.x_prev, i)
            state = est.update(state, 1.0 / (t - 1), delta, oracle.grad(x, i), x)
        total += state.d
    np.testing.assert_allclose(total / 8, oracle.exact_grad(path[-1]), atol=1e-12)


def test_frozen_path_oblivious_monte_carlo():
    oracle = oblivious_quadratic(4, noise=1.0, data_seed=3)
    rng = np.random.default_rng(0)
    path = [rng.dirichlet(np.ones(4)) for _ in range(5)]
    report = diag.frozen_path_unbiasedness(oracle, path, 10000, "oblivious_difference",
                                           np.random.default_rng(1))
    assert report.within(3.0)
    same = [path[0]] * 5
    report = diag.frozen_path_unbiasedness(oracle, same, 10000, "exact_hessian", np.random.default_rng(2))
    assert report.within(3.0)


def test_frozen_path_deterministic_oracle_has_no_deviation():
    oracle = oblivious_quadratic(3, noise=0.0)
    path = [np.full(3, 1 / 3), np.array([1.0, 0, 0]), np.array([0.5, 0.5, 0])]
    report = diag.frozen_path_unbiasedness(oracle, path, 20, "exact_hessian", np.random.default_rng(0))
    assert np.max(np.abs(report.deviation)) <= 1e-14
    assert report.max_ratio == 0.0


def test_frozen_path_non_oblivious_bias_is_small(rng):
    # the coupled stochastic-gradient term makes this a measurement, not an identity
    oracle = smoothed_multilinear(3, data_seed=2)
    path = [np.zeros(3)] + [rng.uniform(0.2, 0.8, 3) for _ in range(4)]
    report = diag.frozen_path_unbiasedness(oracle, path, 4000, "exact_hessian", rng)
    scale = np.linalg.norm(oracle.exact_grad(path[-1]))
    assert np.linalg.norm(report.deviation) <= 0.25 * scale
