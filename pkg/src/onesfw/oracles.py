"""Stochastic first/second-order oracles and the problem zoo.

An oracle represents ``F(x) = E_{z ~ p(z; x)} Ftilde(x; z)``. It samples
``z`` at a point, evaluates ``Ftilde`` and its derivatives for a fixed ``z``,
returns the score ``grad log p(z; x)`` of the sampling density, and (for
verification) the exact expectation ``F`` with its derivatives.

Zoo instances:

* :class:`ObliviousQuadratic` - convex quadratic with additive uniform noise.
* :class:`FiniteSumLogistic` - logistic loss over a synthetic dataset.
* :class:`NonconvexSigmoidSum` - sigmoid loss, smooth and non-convex.
* :class:`ConcaveNQP` - monotone DR-submodular concave quadratic.
* :class:`SmoothedMultilinear` - smoothed multilinear extension of a
  monotone submodular set function; the only non-oblivious instance.
"""
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import CapabilityError, DomainError, InvalidInputError


@dataclass(frozen=True)
class Sample:
    """One draw ``z`` together with the point it was drawn at."""

    payload: object
    birth_point: np.ndarray


@dataclass(frozen=True)
class OracleCaps:
    is_oblivious: bool
    has_exact_hessian: bool
    has_exact_expectation: bool
    z_is_finite: bool


@dataclass(frozen=True)
class ProblemConstants:
    """Certified bounds on the stochastic objective over a feasible set.

    ``B`` bounds ``|Ftilde|``, ``G_F`` the stochastic gradient norm, ``G_p`` the
    score norm, ``L_F`` and ``L_p`` the spectral norms of the stochastic and
    log-density Hessians, ``L2`` their Lipschitz constants.
    """

    B: float
    G_F: float
    G_p: float
    L_F: float
    L_p: float
    L2: float

    @property
    def G(self):
        return max(self.G_F, self.G_p)

    @property
    def L(self):
        return max(self.L_F, self.L_p)

    @property
    def Lbar(self):
        from .diagnostics import lbar

        return lbar(self.B, self.G, self.L)


class StochasticOracle:
    """Base class. Subclasses implement ``_draw``, ``value``, ``grad``."""

    name = "oracle"
    caps = OracleCaps(True, True, True, False)
    # box containing every admissible sampling point, or None for all of R^d
    domain = None

    def __init__(self, dim):
        self.dim = int(dim)
        self._queries = 0
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def queries(self):
        """Total number of ``sample`` calls served by this oracle."""
        return self._queries

    def check_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InvalidInputError(f"point has shape {x.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("point has non-finite entries")
        if self.domain is not None:
            lo, hi = self.domain
            if np.any(x < lo - tol) or np.any(x > hi + tol):
                raise InvalidInputError(f"point outside the oracle domain [{lo}, {hi}]^d")
        return x

    def sample(self, x, rng):
        x = self.check_point(x)
        payload = self._draw(x, rng)
        with self._lock:
            self._queries += 1
        return Sample(payload, x.copy())

    def _draw(self, x, rng):
        raise NotImplementedError

    def value(self, x, z):
        raise NotImplementedError

    def grad(self, x, z):
        raise NotImplementedError

    def hess_vec(self, x, z, u):
        raise CapabilityError(f"{self.name} has no exact Hessian-vector products")

    def logp_grad(self, x, z):
        return np.zeros(self.dim)

    def logp_hess_vec(self, x, z, u):
        return np.zeros(self.dim)

    def stoch_grad(self, x, z):
        """Unbiased gradient estimate when ``z`` was drawn at ``x``.

        This is ``grad + value * logp_grad``; the score term vanishes for
        oblivious oracles.
        """
        g = self.grad(x, z)
        if self.caps.is_oblivious:
            return g
        return g + self.value(x, z) * self.logp_grad(x, z)

    def exact_value(self, x):
        raise CapabilityError(f"{self.name} has no exact expectation")

    def exact_grad(self, x):
        raise CapabilityError(f"{self.name} has no exact expectation")

    def exact_hess(self, x):
        raise CapabilityError(f"{self.name} has no exact Hessian")

    def constants(self, K):
        raise CapabilityError(f"{self.name} does not certify problem constants")


def _payload(z):
    """Accept either a :class:`Sample` or its bare payload."""
    return z.payload if isinstance(z, Sample) else z


def _spectral_norm(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


class ObliviousQuadratic(StochasticOracle):
    """``Ftilde(x; z) = x'Ax/2 - (b + z)'x`` with ``z`` uniform on ``[-noise, noise]^d``."""

    name = "oblivious_quadratic"
    caps = OracleCaps(True, True, True, False)
    quadratic = True

    def __init__(self, A, b, noise=0.0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        super().__init__(b.shape[0])
        if A.shape != (self.dim, self.dim) or not np.allclose(A, A.T):
            raise InvalidInputError("A must be a symmetric (d, d) matrix")
        if np.linalg.eigvalsh(A).min() < -1e-10:
            raise InvalidInputError("A must be positive semidefinite")
        if noise < 0:
            raise InvalidInputError("noise amplitude must be nonnegative")
        self.A, self.b, self.noise = A, b, float(noise)

    def _draw(self, x, rng):
        return rng.uniform(-self.noise, self.noise, size=self.dim)

    def value(self, x, z):
        return float(0.5 * x @ self.A @ x - (self.b + _payload(z)) @ x)

    def grad(self, x, z):
        return self.A @ x - self.b - _payload(z)

    def hess_vec(self, x, z, u):
        return self.A @ u

    def exact_value(self, x):
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def exact_grad(self, x):
        return self.A @ x - self.b

    def exact_hess(self, x):
        return self.A.copy()

    def constants(self, K):
        R = K.radius()
        a = _spectral_norm(self.A)
        lin = float(np.linalg.norm(self.b)) + self.noise * math.sqrt(self.dim)
        return ProblemConstants(
            B=0.5 * a * R * R + lin * R, G_F=a * R + lin, G_p=0.0, L_F=a, L_p=0.0, L2=0.0
        )


class _FiniteSum(StochasticOracle):
    """Uniform index over ``n`` labelled data points ``(a_i, y_i)``."""

    caps = OracleCaps(True, True, True, True)

    def __init__(self, a, y):
        a = np.asarray(a, dtype=float)
        y = np.asarray(y, dtype=float)
        if a.ndim != 2 or y.shape != (a.shape[0],):
            raise InvalidInputError("need data a of shape (n, d) and labels y of shape (n,)")
        if not np.all(np.abs(y) == 1):
            raise InvalidInputError("labels must be +1 or -1")
        super().__init__(a.shape[1])
        self.a, self.y = a, y
        self.n = a.shape[0]

    def _draw(self, x, rng):
        return int(rng.integers(self.n))

    def _index(self, z):
        i = int(_payload(z))
        if not 0 <= i < self.n:
            raise DomainError(f"index {i} outside 0..{self.n - 1}")
        return i

    def _margin_bound(self, K):
        return float(np.linalg.norm(self.a, axis=1).max()), K.radius()


class FiniteSumLogistic(_FiniteSum):
    """``Ftilde(x; i) = log(1 + exp(-y_i a_i'x))``."""

    name = "finite_sum_logistic"

    def value(self, x, z):
        i = self._index(z)
        return float(np.logaddexp(0.0, -self.y[i] * (self.a[i] @ x)))

    def grad(self, x, z):
        i = self._index(z)
        m = self.y[i] * (self.a[i] @ x)
        return -self.y[i] * expit(-m) * self.a[i]

    def hess_vec(self, x, z, u):
        i = self._index(z)
        m = self.y[i] * (self.a[i] @ x)
        return expit(m) * expit(-m) * (self.a[i] @ u) * self.a[i]

    def exact_value(self, x):
        return float(np.logaddexp(0.0, -self.y * (self.a @ x)).mean())

    def exact_grad(self, x):
        m = self.y * (self.a @ x)
        return -(self.y * expit(-m)) @ self.a / self.n

    def exact_hess(self, x):
        m = self.y * (self.a @ x)
        w = expit(m) * expit(-m)
        return (self.a * w[:, None]).T @ self.a / self.n

    def constants(self, K):
        amax, R = self._margin_bound(K)
        return ProblemConstants(
            B=float(np.logaddexp(0.0, amax * R)),
            G_F=amax,
            G_p=0.0,
            L_F=amax ** 2 / 4.0,
            L_p=0.0,
            L2=amax ** 3 / (6.0 * math.sqrt(3.0)),
        )


class NonconvexSigmoidSum(_FiniteSum):
    """``Ftilde(x; i) = 1 / (1 + exp(y_i a_i'x))``."""

    name = "nonconvex_sigmoid_sum"

    def value(self, x, z):
        i = self._index(z)
        return float(expit(-self.y[i] * (self.a[i] @ x)))

    def grad(self, x, z):
        i = self._index(z)
        s = expit(-self.y[i] * (self.a[i] @ x))
        return -s * (1.0 - s) * self.y[i] * self.a[i]

    def hess_vec(self, x, z, u):
        i = self._index(z)
        s = expit(-self.y[i] * (self.a[i] @ x))
        return (1.0 - 2.0 * s) * s * (1.0 - s) * (self.a[i] @ u) * self.a[i]

    def exact_value(self, x):
        return float(expit(-self.y * (self.a @ x)).mean())

    def exact_grad(self, x):
        s = expit(-self.y * (self.a @ x))
        return -(s * (1.0 - s) * self.y) @ self.a / self.n

    def exact_hess(self, x):
        s = expit(-self.y * (self.a @ x))
        w = (1.0 - 2.0 * s) * s * (1.0 - s)
        return (self.a * w[:, None]).T @ self.a / self.n

    def constants(self, K):
        amax, R = self._margin_bound(K)
        return ProblemConstants(
            B=float(expit(amax * R)),
            G_F=amax / 4.0,
            G_p=0.0,
            L_F=amax ** 2 / (6.0 * math.sqrt(3.0)),
            L_p=0.0,
            L2=amax ** 3 / 8.0,
        )


class ConcaveNQP(StochasticOracle):
    """``Ftilde(x; z) = (h + z)'x + x'Hx/2`` on ``[0, 1]^d``, ``z`` uniform noise.

    With ``H`` entrywise nonpositive the expectation is DR-submodular; with
    ``H`` negative semidefinite it is concave; ``h_i >= sum_j |H_ij|`` makes it
    monotone on the unit cube.
    """

    name = "concave_nqp"
    caps = OracleCaps(True, True, True, False)
    quadratic = True
    domain = (0.0, 1.0)

    def __init__(self, h, H, noise=0.0):
        h = np.asarray(h, dtype=float)
        H = np.asarray(H, dtype=float)
        super().__init__(h.shape[0])
        if H.shape != (self.dim, self.dim) or not np.allclose(H, H.T):
            raise InvalidInputError("H must be a symmetric (d, d) matrix")
        if np.any(H > 0):
            raise InvalidInputError("H must be entrywise nonpositive")
        if np.linalg.eigvalsh(H).max() > 1e-10:
            raise InvalidInputError("H must be negative semidefinite")
        if noise < 0:
            raise InvalidInputError("noise amplitude must be nonnegative")
        self.h, self.H, self.noise = h, H, float(noise)

    @property
    def is_monotone(self):
        return bool(np.all(self.h >= np.abs(self.H).sum(axis=1) - 1e-12))

    def _draw(self, x, rng):
        return rng.uniform(-self.noise, self.noise, size=self.dim)

    def value(self, x, z):
        return float((self.h + _payload(z)) @ x + 0.5 * x @ self.H @ x)

    def grad(self, x, z):
        return self.h + _payload(z) + self.H @ x

    def hess_vec(self, x, z, u):
        return self.H @ u

    def exact_value(self, x):
        return float(self.h @ x + 0.5 * x @ self.H @ x)

    def exact_grad(self, x):
        return self.h + self.H @ x

    def exact_hess(self, x):
        return self.H.copy()

    def constants(self, K):
        R = K.radius()
        a = _spectral_norm(self.H)
        lin = float(np.linalg.norm(self.h)) + self.noise * math.sqrt(self.dim)
        return ProblemConstants(
            B=lin * R + 0.5 * a * R * R, G_F=lin + a * R, G_p=0.0, L_F=a, L_p=0.0, L2=0.0
        )


class SmoothedMultilinear(StochasticOracle):
    """Smoothed multilinear extension of a set function ``f``.

    Each ``z_i ~ Bernoulli(xi + (1 - 2 xi) x_i)`` independently and
    ``Ftilde(x; z) = f(z)``, so ``F(x) = E f(z)`` and all dependence on ``x``
    flows through the sampling density. ``fvals[m]`` holds ``f`` on the set
    encoded by the bits of ``m`` (bit ``i`` is item ``i``).
    """

    name = "smoothed_multilinear"
    caps = OracleCaps(False, True, True, True)
    domain = (0.0, 1.0)
    max_dim = 12

    def __init__(self, fvals, xi=0.25):
        fvals = np.asarray(fvals, dtype=float)
        dim = int(round(math.log2(fvals.shape[0]))) if fvals.size else 0
        if fvals.ndim != 1 or dim < 1 or fvals.shape[0] != 1 << dim:
            raise InvalidInputError("fvals must have length 2**d with d >= 1")
        if dim > self.max_dim:
            raise InvalidInputError(f"ground set limited to {self.max_dim} items")
        if not 0.0 < xi < 0.5:
            raise InvalidInputError("smoothing xi must lie in (0, 1/2)")
        super().__init__(dim)
        self.fvals = fvals
        self.xi = float(xi)
        self.slope = 1.0 - 2.0 * self.xi
        self._weights = 1 << np.arange(dim)

    def smoothed(self, x):
        return self.xi + self.slope * np.asarray(x, dtype=float)

    def _draw(self, x, rng):
        return (rng.random(self.dim) < self.smoothed(x)).astype(np.int8)

    def _mask(self, z):
        z = np.asarray(_payload(z))
        if z.shape != (self.dim,) or np.any((z != 0) & (z != 1)):
            raise DomainError("outcome must be a binary vector of the ground-set size")
        return int(z.astype(np.int64) @ self._weights)

    def value(self, x, z):
        return float(self.fvals[self._mask(z)])

    def grad(self, x, z):
        self._mask(z)
        return np.zeros(self.dim)

    def hess_vec(self, x, z, u):
        self._mask(z)
        return np.zeros(self.dim)

    def _density_args(self, x, z):
        self._mask(z)
        p = self.smoothed(x)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainError("Bernoulli parameter left (0, 1); density undefined")
        return p, np.asarray(_payload(z), dtype=float)

    def logp_grad(self, x, z):
        p, z = self._density_args(x, z)
        return self.slope * (z / p - (1.0 - z) / (1.0 - p))

    def logp_hess_vec(self, x, z, u):
        p, z = self._density_args(x, z)
        diag = -(self.slope ** 2) * (z / p ** 2 + (1.0 - z) / (1.0 - p) ** 2)
        return diag * np.asarray(u, dtype=float)

    def _moments(self, x):
        p = np.ascontiguousarray(self.smoothed(x))
        return kernels.multilinear_moments(self.fvals, p)

    def exact_value(self, x):
        return float(self._moments(x)[0])

    def exact_grad(self, x):
        return self.slope * self._moments(x)[1]

    def exact_hess(self, x):
        return self.slope ** 2 * self._moments(x)[2]

    def constants(self, K):
        c, xi = self.slope, self.xi
        return ProblemConstants(
            B=float(np.abs(self.fvals).max()),
            G_F=0.0,
            G_p=math.sqrt(self.dim) * c / xi,
            L_F=0.0,
            L_p=c ** 2 / xi ** 2,
            L2=2.0 * c ** 3 / xi ** 3,
        )


# --- zoo constructors -------------------------------------------------------


def oblivious_quadratic(dim, rank=None, noise=1.0, tilt=1.0, data_seed=0):
    """Random PSD quadratic ``A = M'M / rank`` with linear term ``tilt * N(0, I)``."""
    rank = dim if rank is None else int(rank)
    rng = np.random.default_rng(data_seed)
    M = rng.standard_normal((rank, dim))
    A = M.T @ M / rank
    b = tilt * rng.standard_normal(dim)
    return ObliviousQuadratic(A, b, noise)


def _classification_data(n, dim, data_seed):
    rng = np.random.default_rng(data_seed)
    a = rng.standard_normal((n, dim))
    w = rng.standard_normal(dim)
    y = np.sign(a @ w + 0.5 * rng.standard_normal(n))
    y[y == 0] = 1.0
    return a, y


def finite_sum_logistic(n=200, dim=10, data_seed=0):
    return FiniteSumLogistic(*_classification_data(n, dim, data_seed))


def nonconvex_sigmoid_sum(n=200, dim=10, data_seed=0):
    return NonconvexSigmoidSum(*_classification_data(n, dim, data_seed))


def concave_nqp(dim, noise=0.5, data_seed=0, slack=0.5):
    """Monotone concave DR-submodular quadratic with ``H = -MM'/dim``, ``M >= 0``."""
    rng = np.random.default_rng(data_seed)
    M = rng.uniform(0.0, 1.0, size=(dim, dim))
    H = -(M @ M.T) / dim
    h = np.abs(H).sum(axis=1) + rng.uniform(0.0, slack, size=dim)
    return ConcaveNQP(h, H, noise)


def coverage_function(dim, universe=20, density=0.25, data_seed=0):
    """Weighted coverage: item ``i`` covers a random subset of a universe."""
    rng = np.random.default_rng(data_seed)
    cover = (rng.random((dim, universe)) < density).astype(np.uint8)
    weights = rng.uniform(0.5, 1.5, size=universe)
    return kernels.coverage_table(np.ascontiguousarray(cover), weights)


def budget_additive_function(weights, cap):
    """``f(S) = min(cap, sum_{i in S} w_i)``."""
    weights = np.asarray(weights, dtype=float)
    dim = weights.shape[0]
    masks = np.arange(1 << dim)
    bits = (masks[:, None] >> np.arange(dim)) & 1
    return np.minimum(cap, bits @ weights)


def smoothed_multilinear(dim, kind="coverage", xi=0.25, data_seed=0, universe=20, cap=None):
    if kind == "coverage":
        fvals = coverage_function(dim, universe=universe, data_seed=data_seed)
    elif kind == "budget_additive":
        rng = np.random.default_rng(data_seed)
        weights = rng.uniform(0.5, 1.5, size=dim)
        fvals = budget_additive_function(weights, cap if cap is not None else weights.sum() / 2)
    else:
        raise InvalidInputError(f"unknown set function kind {kind!r}")
    return SmoothedMultilinear(fvals, xi)


ZOO = {
    "oblivious_quadratic": oblivious_quadratic,
    "finite_sum_logistic": finite_sum_logistic,
    "nonconvex_sigmoid_sum": nonconvex_sigmoid_sum,
    "concave_nqp": concave_nqp,
    "smoothed_multilinear": smoothed_multilinear,
}


def make_problem(name, **params):
    """Build a zoo instance from its config name and keyword parameters."""
    try:
        builder = ZOO[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown problem {name!r}; choose from {sorted(ZOO)}"
        ) from None
    return builder(**params)
