"""One-sample stochastic Frank-Wolfe loops and the momentum baseline.

Three loops share one driver:

* ``run_one_sfw`` - general (non-oblivious) loop. From the second iteration
  on it draws ``a ~ U[0, 1]``, samples ``z_t`` at ``a x_t + (1 - a) x_{t-1}``
  and reuses that single sample for both the gradient variation and the
  fresh gradient term.
* ``run_oblivious_one_sfw`` - oblivious loop; ``z_t`` comes from the
  ``x``-independent distribution and the variation is a difference of two
  stochastic gradients.
* ``run_momentum_fw`` - plain momentum averaging without correction.

Minimization modes step ``x + eta (v - x)`` towards the minimizing vertex;
``SUBMODULAR_MAX`` starts at the origin and steps ``x + v / T`` towards the
maximizing vertex (continuous greedy).
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from . import kernels
from .constraints import MAXIMIZE, MINIMIZE
from .errors import CapabilityError, InvalidInputError
from .estimators import DeltaOption


class Mode(enum.Enum):
    CONVEX_MIN = "convex_min"
    NONCONVEX_MIN = "nonconvex_min"
    SUBMODULAR_MAX = "submodular_max"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise InvalidInputError(f"unknown mode {value!r}; choose from {names}") from None

    @property
    def sense(self):
        return MAXIMIZE if self is Mode.SUBMODULAR_MAX else MINIMIZE


# schedule exponent used by each mode's rate guarantee
_MODE_ALPHA = {Mode.CONVEX_MIN: 1.0, Mode.NONCONVEX_MIN: 2.0 / 3.0, Mode.SUBMODULAR_MAX: 1.0}

ALGORITHMS = ("one_sfw", "oblivious_one_sfw", "momentum_fw")


@dataclass
class SolverConfig:
    """Run parameters.

    ``eta`` is ``"theorem"`` (the mode's default schedule), ``"power"``
    (``t**-alpha``), a constant float, or a callable ``eta(t, T)``.
    ``delta_fixed`` overrides the finite-difference step rule.
    """

    T: int
    mode: Mode = Mode.CONVEX_MIN
    alpha: float = None
    eta: object = "theorem"
    delta_option: DeltaOption = DeltaOption.EXACT_HESSIAN
    x1: np.ndarray = None
    seed: int = 0
    record_exact_diagnostics: bool = False
    f_star: float = None
    delta_fixed: float = None
    momentum_rho_exponent: float = 2.0 / 3.0

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        self.delta_option = DeltaOption.parse(self.delta_option)
        if int(self.T) < 1:
            raise InvalidInputError("horizon T must be at least 1")
        self.T = int(self.T)
        if self.alpha is None:
            self.alpha = _MODE_ALPHA[self.mode]
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in (0, 1]")
        if self.delta_fixed is not None and not self.delta_fixed > 0:
            raise InvalidInputError("delta_fixed must be positive")

    def eta_at(self, t):
        T = self.T
        if callable(self.eta):
            return float(self.eta(t, T))
        if self.eta == "theorem":
            if self.mode is Mode.CONVEX_MIN:
                return 1.0 / t
            if self.mode is Mode.NONCONVEX_MIN:
                return T ** (-2.0 / 3.0)
            return 1.0 / T
        if self.eta == "power":
            return t ** (-self.alpha)
        if isinstance(self.eta, (int, float)):
            return float(self.eta)
        raise InvalidInputError(f"unknown step-size schedule {self.eta!r}")


TRACE_FIELDS = ("t", "rho", "eta", "delta", "F", "subopt", "fw_gap", "grad_err_sq", "queries")


@dataclass
class Trace:
    """Per-iteration record; absent values are NaN."""

    columns: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, T):
        cols = {name: np.full(T, np.nan) for name in TRACE_FIELDS}
        cols["t"] = np.arange(1, T + 1, dtype=float)
        return cls(cols)

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name):
        return self.columns[name]

    def has(self, name):
        return bool(np.any(~np.isnan(self.columns[name])))


@dataclass
class RunResult:
    algorithm: str
    x_final: np.ndarray
    x_o: np.ndarray
    trace: Trace
    oracle_queries: int
    iterates: np.ndarray
    d_final: np.ndarray


def rho_schedule(t, alpha):
    """Averaging weight ``(t - 1)**-alpha`` for ``t >= 2``."""
    if t < 2:
        raise InvalidInputError("averaging weight is defined for t >= 2 only")
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError("alpha must lie in (0, 1]")
    return float((t - 1) ** (-alpha))


def _start_point(K, oracle, config):
    if config.mode is Mode.SUBMODULAR_MAX:
        origin = np.zeros(K.dim)
        if not K.contains(origin):
            raise InvalidInputError("submodular maximization needs the origin in K")
        if config.x1 is not None and np.any(np.asarray(config.x1, float) != 0.0):
            raise InvalidInputError("submodular maximization must start at the origin")
        return origin
    x1 = K.default_point() if config.x1 is None else np.array(config.x1, dtype=float)
    if x1.shape != (K.dim,) or not K.contains(x1):
        raise InvalidInputError("initial point is not feasible")
    return x1


def _delta_rule(oracle, K, config):
    if config.delta_option is not DeltaOption.GRADIENT_DIFFERENCE:
        return None
    if config.delta_fixed is not None:
        fixed = config.delta_fixed
        return lambda t: fixed
    consts = oracle.constants(K)
    D = K.diameter()
    Lbar, L2, B = consts.Lbar, consts.L2, consts.B
    return lambda t: est.default_delta_step(config.eta_at(t - 1), Lbar, D, L2, B)


class _Diagnostics:
    def __init__(self, oracle, K, config, trace):
        self.enabled = config.record_exact_diagnostics and oracle.caps.has_exact_expectation
        self.oracle, self.K, self.trace = oracle, K, trace
        self.sense = config.mode.sense
        self.f_star = config.f_star

    def record(self, i, x, d):
        if not self.enabled:
            return
        cols = self.trace.columns
        F = self.oracle.exact_value(x)
        grad = self.oracle.exact_grad(x)
        cols["F"][i] = F
        if self.f_star is not None:
            cols["subopt"][i] = F - self.f_star if self.sense == MINIMIZE else self.f_star - F
        v = self.K.lmo(grad, self.sense)
        sign = -1.0 if self.sense == MINIMIZE else 1.0
        cols["fw_gap"][i] = sign * float((v - x) @ grad)
        diff = grad - d
        cols["grad_err_sq"][i] = float(diff @ diff)


def _run(oracle, K, config, algorithm):
    if oracle.dim != K.dim:
        raise InvalidInputError(f"oracle dim {oracle.dim} differs from set dim {K.dim}")
    if algorithm == "one_sfw":
        est.check_delta_option(oracle, config.delta_option)
        if config.delta_option is DeltaOption.OBLIVIOUS_DIFFERENCE:
            raise InvalidInputError("use run_oblivious_one_sfw for the oblivious difference")
    elif algorithm == "oblivious_one_sfw":
        if not oracle.caps.is_oblivious:
            raise CapabilityError("the oblivious loop needs an oblivious oracle")
    elif algorithm != "momentum_fw":
        raise InvalidInputError(f"unknown algorithm {algorithm!r}")

    rng = config.seed if isinstance(config.seed, np.random.Generator) else np.random.default_rng(config.seed)
    T, alpha, mode = config.T, config.alpha, config.mode
    sense = mode.sense
    step = kernels.ascent_step if mode is Mode.SUBMODULAR_MAX else kernels.fw_step
    delta_rule = _delta_rule(oracle, K, config) if algorithm == "one_sfw" else None

    x = _start_point(K, oracle, config)
    oracle.check_point(x)
    trace = Trace.empty(T)
    cols = trace.columns
    diag = _Diagnostics(oracle, K, config, trace)
    iterates = np.empty((T + 1, K.dim))
    queries = 0
    state = None

    for t in range(1, T + 1):
        i = t - 1
        iterates[i] = x
        if algorithm == "one_sfw" and t > 1:
            mix = est.mix_point(x, state.x_prev, rng)
            z = oracle.sample(mix.x_mid, rng)
            if config.delta_option is DeltaOption.EXACT_HESSIAN:
                delta = est.delta_exact(oracle, x, state, mix, z)
            else:
                step_size = delta_rule(t)
                cols["delta"][i] = step_size
                delta = est.delta_graddiff(oracle, x, state, mix, z, step_size)
        else:
            z = oracle.sample(x, rng)
        queries += 1

        g = oracle.stoch_grad(x, z)
        if t == 1:
            state = est.initial_state(g, x)
        elif algorithm == "momentum_fw":
            rho = float(t ** (-config.momentum_rho_exponent))
            cols["rho"][i] = rho
            state = est.momentum_update(state, rho, g, x)
        else:
            if algorithm == "oblivious_one_sfw":
                delta = est.delta_oblivious(oracle, x, state.x_prev, z)
            rho = rho_schedule(t, alpha)
            cols["rho"][i] = rho
            state = est.update(state, rho, delta, g, x)

        diag.record(i, x, state.d)
        eta = config.eta_at(t)
        cols["eta"][i] = eta
        cols["queries"][i] = queries
        v = K.lmo(state.d, sense)
        x = step(x, v, eta)

    iterates[T] = x
    if queries != T:
        raise AssertionError("one sample per iteration was violated")
    x_o = iterates[int(rng.integers(T))].copy()
    return RunResult(algorithm, x.copy(), x_o, trace, queries, iterates, state.d.copy())


def run_one_sfw(oracle, K, config):
    """One-sample SFW for possibly non-oblivious oracles."""
    return _run(oracle, K, config, "one_sfw")


def run_oblivious_one_sfw(oracle, K, config):
    """One-sample SFW specialised to oblivious oracles."""
    return _run(oracle, K, config, "oblivious_one_sfw")


def run_momentum_fw(oracle, K, config):
    """Momentum Frank-Wolfe baseline with ``rho_t = t**-momentum_rho_exponent``."""
    return _run(oracle, K, config, "momentum_fw")


RUNNERS = {
    "one_sfw": run_one_sfw,
    "oblivious_one_sfw": run_oblivious_one_sfw,
    "momentum_fw": run_momentum_fw,
}


def run(algorithm, oracle, K, config):
    try:
        runner = RUNNERS[algorithm]
    except KeyError:
        raise InvalidInputError(
            f"unknown solver {algorithm!r}; choose from {', '.join(ALGORITHMS)}"
        ) from None
    return runner(oracle, K, config)


def run_deterministic_fw(grad_at, K, config, rho_exponent=None):
    """Reference Frank-Wolfe on an exact gradient with the same schedules.

    With ``rho_exponent`` set, the exact gradients are averaged by the
    momentum recursion so the reference mirrors the momentum baseline.
    Returns the iterates ``x_1 .. x_{T+1}``.
    """
    x = _start_point(K, None, config)
    step = kernels.ascent_step if config.mode is Mode.SUBMODULAR_MAX else kernels.fw_step
    iterates = np.empty((config.T + 1, K.dim))
    state = None
    for t in range(1, config.T + 1):
        iterates[t - 1] = x
        g = grad_at(x)
        if state is None or rho_exponent is None:
            state = est.initial_state(g, x)
        else:
            state = est.momentum_update(state, float(t ** (-rho_exponent)), g, x)
        v = K.lmo(state.d, config.mode.sense)
        x = step(x, v, config.eta_at(t))
    iterates[config.T] = x
    return iterates
