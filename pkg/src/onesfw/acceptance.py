"""Acceptance suite: eleven numbered checks with fixed seeds and tolerances.

Each check returns a :class:`CriterionResult`; ``run_suite`` runs a named
group and ``format_result`` renders the one-line PASS/FAIL report.
"""
import contextlib
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from . import estimators as est
from .constraints import BudgetedBox, L1Ball, UnitSimplex
from .errors import InvalidInputError
from .estimators import DeltaOption
from .oracles import (
    concave_nqp,
    finite_sum_logistic,
    nonconvex_sigmoid_sum,
    oblivious_quadratic,
    smoothed_multilinear,
)
from .solvers import SolverConfig, run, run_deterministic_fw

E_FACTOR = 1.0 - math.exp(-1.0)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    threshold: str
    seconds: float = 0.0
    limit: float = math.inf

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"


def format_result(r):
    return (
        f"{r.status} [{r.number:2d}] {r.name}: {r.measured} | need {r.threshold}"
        f" | {r.seconds:.1f}s (limit {r.limit:g}s)"
    )


# --- standard instances -------------------------------------------------------


def rates_instance(noise=2.0):
    """Rank-one quadratic on the 10-simplex with a small linear tilt.

    The optimum sits on a face where several coordinates nearly tie, so the
    stochastic error, not the curvature, governs convergence.
    """
    return oblivious_quadratic(10, rank=1, noise=noise, tilt=0.1, data_seed=0), UnitSimplex(10)


def sigmoid_instance():
    return nonconvex_sigmoid_sum(n=200, dim=10, data_seed=0), L1Ball(10, 1.0)


def nqp_instance():
    return concave_nqp(4, noise=0.5, data_seed=0), BudgetedBox(np.ones(4), 1.5)


def _constant_C(oracle, K, alpha, option=DeltaOption.EXACT_HESSIAN, use_radius=False):
    c = oracle.constants(K)
    size = K.radius() if use_radius else K.diameter()
    return diag.theorem_constant_C(alpha, size, c.G, c.Lbar, c.L, option), c, size


def _seed_runs(algorithm, oracle, K, seeds, **cfg):
    return [run(algorithm, oracle, K, SolverConfig(seed=s, **cfg)) for s in seeds]


# --- criteria -----------------------------------------------------------------


def _enumerate_z(dim):
    return [np.array(bits, dtype=np.int8) for bits in itertools.product((0, 1), repeat=dim)]


def _z_probability(oracle, x, z):
    p = oracle.smoothed(x)
    return float(np.prod(np.where(z == 1, p, 1.0 - p)))


def criterion_1(rng_seed=1):
    """Enumerated mean of the one-sample Hessian estimate equals the exact Hessian product."""
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for dim in (1, 2, 3):
        oracle = smoothed_multilinear(dim, data_seed=dim)
        zs = _enumerate_z(dim)
        for _ in range(100):
            x = rng.random(dim)
            u = rng.normal(size=dim)
            mean = sum(_z_probability(oracle, x, z) * est.hessian_estimate_vecprod(oracle, x, z, u)
                       for z in zs)
            worst = max(worst, float(np.max(np.abs(mean - oracle.exact_hess(x) @ u))))
    return worst <= 1e-9, f"max error {worst:.3e}", "<= 1e-9"


def criterion_2(rng_seed=2):
    """Gradient-variation estimators are unbiased for the gradient change."""
    rng = np.random.default_rng(rng_seed)
    # 21-point trapezoid rule on [0, 1]
    a_nodes = np.linspace(0.0, 1.0, 21)
    a_weights = np.full(21, 1.0 / 20.0)
    a_weights[[0, -1]] *= 0.5
    worst_mix = 0.0
    for dim in (1, 2, 3):
        oracle = smoothed_multilinear(dim, data_seed=10 + dim)
        zs = _enumerate_z(dim)
        for _ in range(20):
            x_prev, x_t = rng.random(dim), rng.random(dim)
            state = est.EstimatorState(np.zeros(dim), x_prev, 2)
            mean = np.zeros(dim)
            for a, w in zip(a_nodes, a_weights):
                mix = est.MixPoint(float(a), a * x_t + (1.0 - a) * x_prev)
                for z in zs:
                    pz = _z_probability(oracle, mix.x_mid, z)
                    mean += w * pz * est.delta_exact(oracle, x_t, state, mix, z)
            target = oracle.exact_grad(x_t) - oracle.exact_grad(x_prev)
            worst_mix = max(worst_mix, float(np.linalg.norm(mean - target)))
    worst_obl = 0.0
    for oracle in (finite_sum_logistic(n=50, dim=5, data_seed=3),
                   nonconvex_sigmoid_sum(n=50, dim=5, data_seed=4)):
        for _ in range(20):
            x_prev, x_t = rng.normal(size=5), rng.normal(size=5)
            mean = np.mean([est.delta_oblivious(oracle, x_t, x_prev, i) for i in range(oracle.n)],
                           axis=0)
            target = oracle.exact_grad(x_t) - oracle.exact_grad(x_prev)
            worst_obl = max(worst_obl, float(np.linalg.norm(mean - target)))
    ok = worst_mix <= 1e-6 and worst_obl <= 1e-12
    return (ok, f"mixed-point {worst_mix:.3e}, finite-sum {worst_obl:.3e}",
            "mixed-point <= 1e-6 and finite-sum <= 1e-12")


def _mean_grad_err(delta_option, alpha, eta, seeds=range(50), T=1000):
    oracle, K = rates_instance()
    runs = _seed_runs("one_sfw", oracle, K, seeds, T=T, alpha=alpha, eta=eta,
                      delta_option=delta_option, record_exact_diagnostics=True)
    return np.mean([r.trace["grad_err_sq"] for r in runs], axis=0), runs


def _variance_slopes(delta_option=DeltaOption.EXACT_HESSIAN):
    out = {}
    for alpha, eta in ((1.0, "theorem"), (2.0 / 3.0, "power")):
        mean_err, _ = _mean_grad_err(delta_option, alpha, eta)
        out[alpha] = (diag.rate_fit(mean_err, t_window=(10, 1000)), mean_err)
    return out


def criterion_3():
    """Squared gradient-estimate error decays like ``t**-alpha`` and stays under ``C t**-alpha``."""
    oracle, K = rates_instance()
    fits = _variance_slopes()
    windows = {1.0: (-1.25, -0.75), 2.0 / 3.0: (-0.90, -0.45)}
    ok, parts, worst_ratio = True, [], 0.0
    for alpha, (fit, mean_err) in fits.items():
        lo, hi = windows[alpha]
        ok &= lo <= fit.slope <= hi
        C, _, _ = _constant_C(oracle, K, alpha)
        t = np.arange(1, mean_err.size + 1, dtype=float)
        ratio = float(np.max(mean_err[1:] / (C * t[1:] ** -alpha)))
        worst_ratio = max(worst_ratio, ratio)
        parts.append(f"alpha={alpha:.3g} slope {fit.slope:.3f}")
    ok &= worst_ratio <= 1.0
    return (ok, ", ".join(parts) + f", max A_t/(C t^-a) {worst_ratio:.2e}",
            "slope in [-1.25,-0.75] (a=1), [-0.90,-0.45] (a=2/3), ratio <= 1")


def _convex_final_subopt(T, seeds, delta_option=DeltaOption.EXACT_HESSIAN, algorithm="one_sfw"):
    oracle, K = rates_instance()
    f_star = diag.brute_force_opt(oracle, K, "convex_min").value
    runs = _seed_runs(algorithm, oracle, K, seeds, T=T, delta_option=delta_option)
    return np.array([oracle.exact_value(r.x_final) - f_star for r in runs])


def criterion_4():
    """Convex rate: mean suboptimality under the bound and decaying like ``T**-1/2``."""
    oracle, K = rates_instance()
    C, consts, D = _constant_C(oracle, K, 1.0)
    horizons = (100, 1000, 10000)
    means, under = [], True
    for T in horizons:
        m = float(np.mean(_convex_final_subopt(T, range(20))))
        means.append(m)
        under &= m <= diag.convex_rate_bound(C, D, consts.Lbar, T)
    fit = diag.rate_fit(means, t=horizons)
    ok = under and -0.65 <= fit.slope <= -0.35
    shown = ", ".join(f"{m:.3e}" for m in means)
    return (ok, f"mean subopt [{shown}], exponent {fit.slope:.3f}, under bound {under}",
            "under bound at every T and exponent in [-0.65,-0.35]")


def criterion_5():
    """Non-convex rate on the sigmoid loss: FW gap of the random output iterate."""
    oracle, K = sigmoid_instance()
    C, consts, D = _constant_C(oracle, K, 2.0 / 3.0)
    horizons = (100, 1000, 10000)
    means, under = [], True
    for T in horizons:
        runs = _seed_runs("one_sfw", oracle, K, range(20), T=T, mode="nonconvex_min")
        m = float(np.mean([diag.fw_gap(oracle.exact_grad, K, r.x_o) for r in runs]))
        means.append(m)
        under &= m <= diag.nonconvex_rate_bound(consts.B, C, D, consts.Lbar, T)
    fit = diag.rate_fit(means, t=horizons)
    ok = under and -0.48 <= fit.slope <= -0.18
    shown = ", ".join(f"{m:.3e}" for m in means)
    return (ok, f"mean gap [{shown}], exponent {fit.slope:.3f}, under bound {under}",
            "under bound at every T and exponent in [-0.48,-0.18]")


def criterion_6():
    """Continuous greedy reaches the ``1 - 1/e`` guarantee on a concave NQP."""
    oracle, K = nqp_instance()
    C, consts, R = _constant_C(oracle, K, 1.0, use_radius=True)
    T = 1000
    opt = diag.brute_force_opt(oracle, K, "submodular_max").value
    runs = _seed_runs("one_sfw", oracle, K, range(20), T=T, mode="submodular_max")
    mean = float(np.mean([oracle.exact_value(r.x_final) for r in runs]))
    theory = E_FACTOR * opt - diag.submodular_rate_bound(C, R, consts.Lbar, T)
    practical = E_FACTOR * opt - 0.05 * opt
    ok = mean >= theory and mean >= practical
    return (ok, f"mean F {mean:.5f}, OPT {opt:.5f}, ratio {mean / opt:.4f}",
            f">= {max(theory, practical):.5f} ((1-1/e)OPT - max(bound, 0.05 OPT))")


def criterion_7(rng_seed=7):
    """Central-difference Hessian products on a quartic stay within ``D^2 L2 delta``."""
    rng = np.random.default_rng(rng_seed)
    L2, D, dim = 24.0, 2.0, 4
    grad = lambda y: 4.0 * y**3
    worst = 0.0
    for delta in (1e-1, 1e-2, 1e-3, 1e-4):
        for _ in range(50):
            x = rng.uniform(-0.5, 0.5, dim)
            u = rng.normal(size=dim)
            u *= D * rng.random() / np.linalg.norm(u)
            err = np.linalg.norm(est.fd_hvp(grad, x, u, delta) - 12.0 * x**2 * u)
            worst = max(worst, float(err / (D**2 * L2 * delta)))
    return worst <= 1.0, f"max error/bound {worst:.3e}", "<= 1"


def criterion_8():
    """Gradient-difference and exact-Hessian options behave alike."""
    exact = _variance_slopes(DeltaOption.EXACT_HESSIAN)
    fd = _variance_slopes(DeltaOption.GRADIENT_DIFFERENCE)
    diffs = [abs(exact[a][0].slope - fd[a][0].slope) for a in exact]
    sub_exact = float(np.mean(_convex_final_subopt(1000, range(50))))
    sub_fd = float(np.mean(_convex_final_subopt(1000, range(50), DeltaOption.GRADIENT_DIFFERENCE)))
    ratio = max(sub_exact / sub_fd, sub_fd / sub_exact)
    ok = max(diffs) <= 0.1 and ratio <= 2.0
    return (ok, f"slope differences {max(diffs):.3e}, subopt ratio {ratio:.3f}",
            "slope difference <= 0.1 and ratio <= 2")


def criterion_9():
    """Every solver draws exactly one sample per iteration."""
    cases = [
        (rates_instance(), "convex_min", ("one_sfw", "oblivious_one_sfw", "momentum_fw")),
        (sigmoid_instance(), "nonconvex_min", ("one_sfw", "oblivious_one_sfw", "momentum_fw")),
        (nqp_instance(), "submodular_max", ("one_sfw", "oblivious_one_sfw", "momentum_fw")),
        ((smoothed_multilinear(4), BudgetedBox(np.ones(4), 2.0)), "submodular_max",
         ("one_sfw", "momentum_fw")),
    ]
    bad, total = [], 0
    for (oracle, K), mode, algorithms in cases:
        for algorithm in algorithms:
            options = (["exact_hessian", "gradient_difference"] if algorithm == "one_sfw"
                       else ["exact_hessian"])
            for option in options:
                for T in (1, 2, 37):
                    before = oracle.queries
                    res = run(algorithm, oracle, K,
                              SolverConfig(T=T, mode=mode, delta_option=option, seed=T))
                    total += 1
                    if res.oracle_queries != T or oracle.queries - before != T:
                        bad.append(f"{oracle.name}/{algorithm}/{option}/T={T}")
    return not bad, f"{total - len(bad)}/{total} runs with queries == T", "all runs"


def criterion_10():
    """Zero noise: every loop reproduces deterministic Frank-Wolfe bit for bit."""
    oracle = oblivious_quadratic(10, noise=0.0, data_seed=5)
    K = UnitSimplex(10)
    T = 300
    cfg = dict(T=T, seed=11)
    mismatched = []
    reference = run_deterministic_fw(oracle.exact_grad, K, SolverConfig(**cfg))
    for algorithm, option in (("one_sfw", "exact_hessian"), ("one_sfw", "gradient_difference"),
                              ("oblivious_one_sfw", "exact_hessian")):
        res = run(algorithm, oracle, K, SolverConfig(delta_option=option, **cfg))
        if not np.array_equal(res.iterates, reference):
            mismatched.append(f"{algorithm}/{option}")
    cfg_m = SolverConfig(**cfg)
    reference_m = run_deterministic_fw(oracle.exact_grad, K, cfg_m,
                                       rho_exponent=cfg_m.momentum_rho_exponent)
    if not np.array_equal(run("momentum_fw", oracle, K, cfg_m).iterates, reference_m):
        mismatched.append("momentum_fw")
    shown = ", ".join(mismatched) if mismatched else "none"
    return not mismatched, f"mismatched trajectories: {shown}", "none"


def _buggy_update(state, rho, delta, g, x=None):
    # rho weights the carried surrogate where 1 - rho belongs
    est._check_rho(rho)
    d = rho * (state.d + np.asarray(delta, float)) + rho * np.asarray(g, float)
    return est.EstimatorState(d, state.x_prev if x is None else x, state.t + 1)


@contextlib.contextmanager
def injected_update_bug():
    """Temporarily swap the corrected recursion for the mis-weighted one."""
    original = est.update
    est.update = _buggy_update
    try:
        yield
    finally:
        est.update = original


def criterion_11():
    """The mis-weighted recursion must be caught by the rate checks."""
    with injected_update_bug():
        c3 = CRITERIA[3]()
        # the convex check only runs when the variance check misses the bug
        c4 = None if not c3.passed else CRITERIA[4]()
    detected = not c3.passed or not c4.passed
    shown = f"[3] {c3.status}" + ("" if c4 is None else f", [4] {c4.status}")
    return detected, f"under mutation: {shown}", "at least one of [3], [4] FAIL"


_SPECS = {
    1: ("Hessian-estimator unbiasedness", criterion_1, 5),
    2: ("gradient-variation unbiasedness", criterion_2, 5),
    3: ("estimator variance decay", criterion_3, 120),
    4: ("convex rate and bound", criterion_4, 300),
    5: ("non-convex rate and bound", criterion_5, 600),
    6: ("submodular approximation", criterion_6, 120),
    7: ("finite-difference error bound", criterion_7, 1),
    8: ("option parity", criterion_8, 180),
    9: ("single-sample discipline", criterion_9, 10),
    10: ("zero-noise degeneration", criterion_10, 1),
    11: ("mutation sensitivity", criterion_11, 120),
}


def _make_runner(number):
    name, fn, limit = _SPECS[number]

    def runner():
        start = time.perf_counter()
        passed, measured, threshold = fn()
        seconds = time.perf_counter() - start
        if seconds > limit:
            passed = False
            measured += " (over time limit)"
        return CriterionResult(number, name, bool(passed), measured, threshold, seconds, limit)

    runner.__name__ = f"criterion_{number}_runner"
    runner.__doc__ = fn.__doc__
    return runner


CRITERIA = {n: _make_runner(n) for n in _SPECS}

SUITES = {
    "unbiasedness": (1, 2),
    "rates": (3, 4, 5, 8),
    "bounds": (6, 7, 9, 10),
    "mutation": (11,),
    "all": tuple(sorted(_SPECS)),
}


def run_suite(name, report=None):
    """Run a named suite; ``report`` is called with each result as it completes."""
    if name not in SUITES:
        raise InvalidInputError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    for number in SUITES[name]:
        result = CRITERIA[number]()
        results.append(result)
        if report is not None:
            report(result)
    return results
