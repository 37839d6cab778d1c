import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from onesfw import _kernels_py as py_backend
from onesfw import kernels

compiled = kernels.compiled_module()
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, st.integers(1, 12), elements=finite)


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("ONESFW_PURE_PYTHON", "1")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.BACKEND == "python"
        assert reloaded.lmo_simplex is py_backend.lmo_simplex
    finally:
        monkeypatch.delenv("ONESFW_PURE_PYTHON")
        importlib.reload(kernels)


@needs_compiled
@settings(max_examples=200, deadline=None)
@given(d=vec, scale=st.floats(0.1, 10))
def test_parity_linear_oracles(d, scale):
    assert np.array_equal(compiled.lmo_simplex(d, scale), py_backend.lmo_simplex(d, scale))
    assert np.array_equal(compiled.lmo_l1(d, scale), py_backend.lmo_l1(d, scale))
    lower, upper = -np.abs(d) - 1.0, np.abs(d) + 1.0
    assert np.array_equal(compiled.lmo_box(d, lower, upper), py_backend.lmo_box(d, lower, upper))
    u = np.abs(d) + 0.5
    budget = float(u.sum()) * 0.4
    assert np.array_equal(
        compiled.lmo_budgeted_box(d, u, budget), py_backend.lmo_budgeted_box(d, u, budget)
    )


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(d=vec, rho=st.floats(0, 1))
def test_parity_updates(d, rho):
    g, delta = d[::-1].copy(), np.sin(d)
    assert np.array_equal(compiled.sfw_update(d, delta, g, rho), py_backend.sfw_update(d, delta, g, rho))
    assert np.array_equal(compiled.momentum_update(d, g, rho), py_backend.momentum_update(d, g, rho))
    assert np.array_equal(compiled.fw_step(d, g, rho), py_backend.fw_step(d, g, rho))
    assert np.array_equal(compiled.ascent_step(d, g, rho), py_backend.ascent_step(d, g, rho))


@needs_compiled
@pytest.mark.parametrize("dim", [1, 2, 5, 9])
def test_parity_multilinear_and_tables(dim, rng):
    fvals = rng.random(1 << dim)
    p = rng.uniform(0.05, 0.95, dim)
    for a, b in zip(compiled.multilinear_moments(fvals, p), py_backend.multilinear_moments(fvals, p)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)
    cover = (rng.random((dim, 15)) < 0.3).astype(np.uint8)
    w = rng.random(15)
    np.testing.assert_allclose(compiled.coverage_table(cover, w), py_backend.coverage_table(cover, w),
                               rtol=1e-14)
    V = rng.normal(size=(3 * dim + 1, dim))
    assert compiled.max_pairwise_sqdist(V) == pytest.approx(py_backend.max_pairwise_sqdist(V), rel=1e-13)


def test_update_formulas():
    d, delta, g = np.array([2.0, 0.0]), np.array([0.0, 2.0]), np.array([1.0, 1.0])
    np.testing.assert_allclose(kernels.sfw_update(d, delta, g, 0.5), [1.5, 1.5])
    np.testing.assert_allclose(kernels.momentum_update(np.array([4.0, 0.0]), np.array([0.0, 4.0]), 0.25),
                               [3.0, 1.0])


def test_multilinear_moments_match_enumeration(rng):
    dim = 3
    fvals = rng.random(8)
    p = rng.uniform(0.1, 0.9, dim)
    value, grad, hess = kernels.multilinear_moments(fvals, p)
    bits = (np.arange(8)[:, None] >> np.arange(dim)) & 1
    probs = np.prod(np.where(bits == 1, p, 1 - p), axis=1)
    assert value == pytest.approx(probs @ fvals)
    # F is multilinear, so central differences are exact up to rounding
    h = 1e-4
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        plus = np.prod(np.where(bits == 1, p + e, 1 - p - e), axis=1) @ fvals
        minus = np.prod(np.where(bits == 1, p - e, 1 - p + e), axis=1) @ fvals
        assert grad[i] == pytest.approx((plus - minus) / (2 * h), abs=1e-9)
    assert np.allclose(np.diag(hess), 0.0)
    assert np.allclose(hess, hess.T)


def test_coverage_table_is_monotone_submodular(rng):
    cover = (rng.random((4, 10)) < 0.4).astype(np.uint8)
    f = kernels.coverage_table(cover, rng.random(10))
    assert f[0] == 0.0
    for mask in range(16):
        for i in range(4):
            if mask >> i & 1:
                continue
            gain = f[mask | 1 << i] - f[mask]
            assert gain >= -1e-12
            for j in range(4):
                if j != i and not mask >> j & 1:
                    bigger = mask | 1 << j
                    assert f[bigger | 1 << i] - f[bigger] <= gain + 1e-12
