"""Verification instruments: Frank-Wolfe gap, rate fits, theorem constants,
frozen-path bias measurements and brute-force reference optima."""
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import estimators as est
from .constraints import MAXIMIZE, MINIMIZE, Box, BudgetedBox, L2Ball
from .errors import CapabilityError, InvalidInputError
from .estimators import DeltaOption


def fw_gap(exact_grad_at, K, x, sense=MINIMIZE):
    """``max_{v in K} <v - x, -grad F(x)>`` (sign flipped for maximization)."""
    x = np.asarray(x, dtype=float)
    g = exact_grad_at(x)
    v = K.lmo(g, sense)
    gap = float((v - x) @ g)
    return -gap if sense == MINIMIZE else gap


def lbar(B, G, L):
    """Root of ``4B^2G^4 + 16G^4 + 4L^2 + 4B^2L^2``."""
    return math.sqrt(4 * B**2 * G**4 + 16 * G**4 + 4 * L**2 + 4 * B**2 * L**2)


def schedule_denominator(alpha):
    return 2.0 - 2.0 ** (-alpha) - alpha


def theorem_constant_C(alpha, D, G, Lbar, L, option=DeltaOption.EXACT_HESSIAN):
    """Variance-decay constant ``C`` of the bound ``E||grad F(x_t) - d_t||^2 <= C t^-alpha``.

    Pass the radius ``R`` as ``D`` for the submodular bound.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError("alpha must lie in (0, 1]")
    h = schedule_denominator(alpha)
    option = DeltaOption.parse(option)
    if option is DeltaOption.GRADIENT_DIFFERENCE:
        first = 8.0 * (D**2 * Lbar**2 + G**2 + G * D * Lbar) / h
        third = (4.0 * D * (Lbar + L)) ** 4
    else:
        first = 2.0 * (2.0 * G + D * Lbar) ** 2 / h
        third = (2.0 * D * (Lbar + L)) ** 4
    return max(first, (2.0 / h) ** 4, third)


def convex_rate_bound(C, D, Lbar, T):
    return 2.0 * math.sqrt(C) * D / math.sqrt(T) + Lbar * D**2 * (1.0 + math.log(T)) / (2.0 * T)


def nonconvex_rate_bound(B, C, D, Lbar, T):
    return (2.0 * B + 1.5 * math.sqrt(C) * D) / T ** (1.0 / 3.0) + Lbar * D**2 / (2.0 * T ** (2.0 / 3.0))


def submodular_rate_bound(C, R, Lbar, T):
    return 4.0 * R * math.sqrt(C) / math.sqrt(T) + Lbar * R**2 / (2.0 * T)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    t_window: tuple


def rate_fit(values, t=None, t_window=None):
    """Least-squares slope of ``log(value)`` against ``log(t)``."""
    values = np.asarray(values, dtype=float)
    t = np.arange(1, values.size + 1, dtype=float) if t is None else np.asarray(t, dtype=float)
    if t.shape != values.shape:
        raise InvalidInputError("values and t must have the same length")
    keep = np.ones(values.size, dtype=bool)
    if t_window is not None:
        keep = (t >= t_window[0]) & (t <= t_window[1])
    v, tt = values[keep], t[keep]
    if v.size < 2:
        raise InvalidInputError("need at least two points inside the window")
    if np.any(~(v > 0)):
        raise InvalidInputError("rate fits need strictly positive values")
    lx, ly = np.log(tt), np.log(v)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = ((ly - ly.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / spread if spread > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(r2), (float(tt.min()), float(tt.max())))


@dataclass(frozen=True)
class FrozenPathReport:
    deviation: np.ndarray
    stderr: np.ndarray
    reps: int

    @property
    def max_ratio(self):
        """Largest ``|deviation| / stderr`` over coordinates with nonzero spread."""
        spread = self.stderr > 0
        if not np.any(spread):
            return 0.0 if np.allclose(self.deviation, 0.0) else math.inf
        if np.any(~spread & (np.abs(self.deviation) > 1e-12)):
            return math.inf
        return float(np.max(np.abs(self.deviation[spread]) / self.stderr[spread]))

    def within(self, k=3.0):
        return self.max_ratio <= k


def replay_estimator(oracle, path, rng, delta_option, alpha=1.0, delta_step=1e-4):
    """Run the corrected recursion once along a fixed path; return the final ``d``."""
    option = DeltaOption.parse(delta_option)
    path = [np.asarray(p, dtype=float) for p in path]
    z = oracle.sample(path[0], rng)
    state = est.initial_state(oracle.stoch_grad(path[0], z), path[0])
    for t, x in enumerate(path[1:], start=2):
        rho = (t - 1) ** (-alpha)
        if option is DeltaOption.OBLIVIOUS_DIFFERENCE:
            z = oracle.sample(x, rng)
            delta = est.delta_oblivious(oracle, x, state.x_prev, z)
        else:
            mix = est.mix_point(x, state.x_prev, rng)
            z = oracle.sample(mix.x_mid, rng)
            if option is DeltaOption.EXACT_HESSIAN:
                delta = est.delta_exact(oracle, x, state, mix, z)
            else:
                delta = est.delta_graddiff(oracle, x, state, mix, z, delta_step)
        state = est.update(state, rho, delta, oracle.stoch_grad(x, z), x)
    return state.d


def frozen_path_unbiasedness(oracle, path, reps, delta_option, rng, alpha=1.0):
    """Measure ``mean(d_T) - grad F(x_T)`` over independent replays of a fixed path."""
    if not oracle.caps.has_exact_expectation:
        raise CapabilityError(f"{oracle.name} has no exact gradient")
    est.check_delta_option(oracle, delta_option)
    ds = np.array([replay_estimator(oracle, path, rng, delta_option, alpha) for _ in range(reps)])
    target = oracle.exact_grad(np.asarray(path[-1], dtype=float))
    mean = ds.mean(axis=0)
    stderr = ds.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(target)
    # coordinates that never vary are reported exactly, free of summation rounding
    constant = np.ptp(ds, axis=0) == 0
    mean[constant] = ds[0, constant]
    stderr[constant] = 0.0
    return FrozenPathReport(mean - target, stderr, reps)


# --- reference optima ---------------------------------------------------------


@dataclass(frozen=True)
class OptResult:
    value: float
    point: np.ndarray
    gap: float
    method: str
    exact: bool = True
    grid_value: float = None


def _line_search(oracle, x, direction, gmax):
    slope = float(oracle.exact_grad(x) @ direction)
    if slope >= 0:
        return 0.0
    if getattr(oracle, "quadratic", False):
        curv = float(direction @ oracle.exact_hess(x) @ direction)
        return gmax if curv <= 0 else min(gmax, -slope / curv)
    res = optimize.minimize_scalar(
        lambda s: oracle.exact_value(x + s * direction), bounds=(0.0, gmax), method="bounded",
        options={"xatol": 1e-14},
    )
    return float(res.x)


def _pairwise_fw(oracle, K, tol, max_iter):
    verts = K.vertices()
    x0 = K.default_point()
    # express the start as a convex combination of vertices
    start = int(np.argmin(np.linalg.norm(verts - x0, axis=1)))
    weights = np.zeros(len(verts))
    weights[start] = 1.0
    x = verts[start].copy()
    gap = math.inf
    for _ in range(max_iter):
        g = oracle.exact_grad(x)
        scores = verts @ g
        s = int(np.argmin(scores))
        gap = float((x - verts[s]) @ g)
        if gap <= tol:
            break
        active = np.flatnonzero(weights > 0)
        a = int(active[np.argmax(scores[active])])
        direction = verts[s] - verts[a]
        step = _line_search(oracle, x, direction, weights[a])
        if step <= 0:
            break
        weights[s] += step
        weights[a] -= step
        if weights[a] < 1e-15:
            weights[a] = 0.0
        x = weights @ verts
    return x, gap


def _vanilla_fw(oracle, K, tol, max_iter):
    x = K.default_point()
    gap = math.inf
    for _ in range(max_iter):
        g = oracle.exact_grad(x)
        v = K.lmo(g)
        gap = float((x - v) @ g)
        if gap <= tol:
            break
        step = _line_search(oracle, x, v - x, 1.0)
        if step <= 0:
            break
        x = x + step * (v - x)
    return x, gap


def _nqp_batch_values(oracle, X):
    return X @ oracle.h + 0.5 * np.einsum("ij,jk,ik->i", X, oracle.H, X)


def _box_bounds(K):
    if isinstance(K, BudgetedBox):
        return np.zeros(K.dim), K.upper
    if isinstance(K, Box):
        return K.lower, K.upper
    raise InvalidInputError("grid search supports Box and BudgetedBox sets")


def _grid_maximize(oracle, K, final_step=1e-3, chunk=200000):
    lo, hi = _box_bounds(K)
    step = 0.05 * float(np.max(hi - lo))
    centre, half = None, None
    best_x, best_v = None, -math.inf
    while True:
        if centre is None:
            axes = [np.arange(l, h + step / 2, step) for l, h in zip(lo, hi)]
        else:
            axes = [
                np.clip(c + step * np.arange(-half, half + 1), l, h)
                for c, l, h in zip(centre, lo, hi)
            ]
        for block in _chunked_product(axes, chunk):
            feasible = np.all(block >= lo - 1e-12, axis=1) & np.all(block <= hi + 1e-12, axis=1)
            if isinstance(K, BudgetedBox):
                feasible &= block.sum(axis=1) <= K.budget + 1e-12
            block = block[feasible]
            if not len(block):
                continue
            vals = _nqp_batch_values(oracle, block)
            j = int(np.argmax(vals))
            if vals[j] > best_v:
                best_v, best_x = float(vals[j]), block[j].copy()
        if step <= final_step * (1 + 1e-9):
            return best_x, best_v
        centre, half = best_x, 15
        step = max(step / 10.0, final_step)


def _chunked_product(axes, chunk):
    product = itertools.product(*axes)
    while True:
        rows = list(itertools.islice(product, chunk))
        if not rows:
            return
        yield np.array(rows, dtype=float)


def _polish_concave(oracle, K, x0):
    lo, hi = _box_bounds(K)
    constraints = []
    if isinstance(K, BudgetedBox):
        constraints.append({"type": "ineq", "fun": lambda x: K.budget - x.sum(),
                            "jac": lambda x: -np.ones_like(x)})
    res = optimize.minimize(
        lambda x: -oracle.exact_value(x), x0, jac=lambda x: -oracle.exact_grad(x),
        bounds=list(zip(lo, hi)), constraints=constraints, method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    x = np.clip(res.x, lo, hi)
    if isinstance(K, BudgetedBox) and x.sum() > K.budget:
        x *= K.budget / x.sum()
    return x


GRID_DIM_LIMIT = 4


def brute_force_opt(oracle, K, mode, tol=1e-10, max_iter=200000):
    """Reference optimum for small instances.

    * ``convex_min``: pairwise Frank-Wolfe on the exact gradient over a
      polytope (vanilla Frank-Wolfe with line search on an L2 ball) until the
      gap is below ``tol``.
    * ``submodular_max`` on :class:`~onesfw.oracles.ConcaveNQP` (``dim <= 4``):
      zooming grid search down to step ``1e-3`` followed by an SLSQP polish.
    * ``submodular_max`` on :class:`~onesfw.oracles.SmoothedMultilinear`:
      maximum of ``F`` over the vertices of ``K``; exact for boxes and for
      budgeted boxes with unit upper bounds.
    """
    from .oracles import ConcaveNQP, SmoothedMultilinear
    from .solvers import Mode

    mode = Mode.parse(mode)
    if not oracle.caps.has_exact_expectation:
        raise CapabilityError(f"{oracle.name} has no exact expectation")
    if mode is Mode.CONVEX_MIN:
        if isinstance(K, L2Ball):
            x, gap = _vanilla_fw(oracle, K, tol, max_iter)
            method = "fw-line-search"
        else:
            if len(K.vertices()) > 4096:
                raise InvalidInputError("too many vertices for the pairwise reference solve")
            x, gap = _pairwise_fw(oracle, K, tol, max_iter)
            method = "pairwise-fw"
        return OptResult(oracle.exact_value(x), x, gap, method, exact=gap <= tol)
    if mode is Mode.SUBMODULAR_MAX:
        grad = oracle.exact_grad
        if isinstance(oracle, ConcaveNQP):
            if K.dim > GRID_DIM_LIMIT:
                raise InvalidInputError(f"grid search limited to dim <= {GRID_DIM_LIMIT}")
            x_grid, v_grid = _grid_maximize(oracle, K)
            x = _polish_concave(oracle, K, x_grid)
            v = oracle.exact_value(x)
            if v < v_grid:
                x, v = x_grid, v_grid
            return OptResult(v, x, fw_gap(grad, K, x, MAXIMIZE), "grid+slsqp", True, v_grid)
        if isinstance(oracle, SmoothedMultilinear):
            verts = K.vertices()
            vals = np.array([oracle.exact_value(v) for v in verts])
            j = int(np.argmax(vals))
            exact = isinstance(K, Box) or (isinstance(K, BudgetedBox) and np.all(K.upper == 1.0))
            return OptResult(float(vals[j]), verts[j].copy(), fw_gap(grad, K, verts[j], MAXIMIZE),
                             "vertex-enumeration", exact)
        raise InvalidInputError(f"no reference maximizer for {oracle.name}")
    raise InvalidInputError("non-convex minimization has no brute-force reference")
