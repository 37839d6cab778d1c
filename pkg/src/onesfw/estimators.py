"""Gradient-surrogate recursions and gradient-variation estimators.

The corrected recursion keeps ``d_t`` unbiased for ``grad F(x_t)`` by adding an
estimate of ``grad F(x_t) - grad F(x_{t-1})`` before averaging::

    d_t = (1 - rho_t) * (d_{t-1} + delta_t) + rho_t * g_t

``delta_t`` comes from one of three routes: a one-sample Hessian estimate at
a uniformly mixed point (exact Hessian products or central differences of
gradients), or, for oblivious oracles, the difference of two stochastic
gradients sharing the same sample.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapabilityError, InvalidInputError


class DeltaOption(enum.Enum):
    EXACT_HESSIAN = "exact_hessian"
    GRADIENT_DIFFERENCE = "gradient_difference"
    OBLIVIOUS_DIFFERENCE = "oblivious_difference"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(o.value for o in cls)
            raise InvalidInputError(f"unknown delta option {value!r}; choose from {names}") from None


@dataclass(frozen=True)
class EstimatorState:
    d: np.ndarray
    x_prev: np.ndarray
    t: int = 1


@dataclass(frozen=True)
class MixPoint:
    a: float
    x_mid: np.ndarray


def initial_state(g, x1):
    """State after the first iteration: ``d_1`` is the first stochastic gradient."""
    return EstimatorState(np.array(g, dtype=float), np.array(x1, dtype=float), 1)


def mix_point(x_t, x_prev, rng):
    a = float(rng.random())
    return MixPoint(a, a * x_t + (1.0 - a) * x_prev)


def check_delta_option(oracle, option):
    option = DeltaOption.parse(option)
    if option is DeltaOption.OBLIVIOUS_DIFFERENCE and not oracle.caps.is_oblivious:
        raise CapabilityError("oblivious difference needs an oblivious oracle")
    if option is DeltaOption.EXACT_HESSIAN and not oracle.caps.has_exact_hessian:
        raise CapabilityError(f"{oracle.name} has no exact Hessian-vector products")
    return option


def hessian_estimate_vecprod(oracle, x, z, u):
    """One-sample unbiased estimate of ``hess F(x) @ u``.

    With ``s = grad log p(z; x)`` this returns::

        Ftilde*(s'u)*s + hess Ftilde @ u + (s'u)*grad Ftilde
            + Ftilde * hess log p @ u + (grad Ftilde'u)*s
    """
    if not oracle.caps.has_exact_hessian:
        raise CapabilityError(f"{oracle.name} has no exact Hessian-vector products")
    u = np.asarray(u, dtype=float)
    hv = oracle.hess_vec(x, z, u)
    if oracle.caps.is_oblivious:
        return hv
    s = oracle.logp_grad(x, z)
    g = oracle.grad(x, z)
    f = oracle.value(x, z)
    su = s @ u
    return f * su * s + hv + su * g + f * oracle.logp_hess_vec(x, z, u) + (g @ u) * s


def fd_hvp(grad_at, x, u, delta):
    """Central difference ``(grad(x + delta*u) - grad(x - delta*u)) / (2 delta)``.

    Off by at most ``L2 * delta * ||u||**2`` from the exact product when the
    Hessian of the underlying function is ``L2``-Lipschitz.
    """
    if not delta > 0:
        raise InvalidInputError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return (grad_at(x + delta * u) - grad_at(x - delta * u)) / (2.0 * delta)


def delta_exact(oracle, x_t, state, mix, z):
    """Gradient variation from the Hessian estimate at the mixed point."""
    return hessian_estimate_vecprod(oracle, mix.x_mid, z, x_t - state.x_prev)


def delta_graddiff(oracle, x_t, state, mix, z, delta_t):
    """Like :func:`delta_exact` with both Hessian products replaced by central differences."""
    if not delta_t > 0:
        raise InvalidInputError("finite-difference step must be positive")
    x = mix.x_mid
    u = x_t - state.x_prev
    hv = fd_hvp(lambda y: oracle.grad(y, z), x, u, delta_t)
    if oracle.caps.is_oblivious:
        return hv
    s = oracle.logp_grad(x, z)
    g = oracle.grad(x, z)
    f = oracle.value(x, z)
    su = s @ u
    logp_hv = fd_hvp(lambda y: oracle.logp_grad(y, z), x, u, delta_t)
    return f * su * s + hv + su * g + f * logp_hv + (g @ u) * s


def delta_oblivious(oracle, x_t, x_prev, z):
    """``grad Ftilde(x_t; z) - grad Ftilde(x_prev; z)`` with one shared sample."""
    if not oracle.caps.is_oblivious:
        raise CapabilityError("oblivious difference needs an oblivious oracle")
    return oracle.grad(x_t, z) - oracle.grad(x_prev, z)


def _check_rho(rho):
    if not 0.0 <= rho <= 1.0:
        raise InvalidInputError(f"averaging weight {rho} outside [0, 1]")


def update(state, rho, delta, g, x=None):
    """Corrected recursion ``(1 - rho)(d + delta) + rho g``; ``x`` becomes the new ``x_prev``."""
    _check_rho(rho)
    d = kernels.sfw_update(state.d, np.asarray(delta, float), np.asarray(g, float), float(rho))
    return EstimatorState(d, state.x_prev if x is None else x, state.t + 1)


def momentum_update(state, rho, g, x=None):
    """Plain momentum averaging ``(1 - rho) d + rho g`` (biased baseline)."""
    _check_rho(rho)
    d = kernels.momentum_update(state.d, np.asarray(g, float), float(rho))
    return EstimatorState(d, state.x_prev if x is None else x, state.t + 1)


def default_delta_step(eta_prev, Lbar, D, L2, B, fallback=1e-4):
    """Finite-difference step ``sqrt(3) * eta_{t-1} * Lbar / (D * L2 * (1 + B))``.

    Falls back to a fixed step when ``L2`` or ``D`` is zero (any step is exact
    for quadratics).
    """
    if L2 <= 0 or D <= 0:
        return fallback
    step = math.sqrt(3.0) * eta_prev * Lbar / (D * L2 * (1.0 + B))
    return step if step > 0 else fallback
