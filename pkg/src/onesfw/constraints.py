"""Compact convex feasible regions with exact linear optimization oracles.

Every set exposes ``lmo(d, sense)``, ``diameter()``, ``radius()`` and
``contains(x, tol)``. Ties in the linear oracles are broken towards the
lowest coordinate index, so repeated calls are bit-reproducible.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

# exhaustive vertex enumeration limits for BudgetedBox
_EXACT_DIM_LIMIT = 12
_EXACT_VERTEX_LIMIT = 20000


def _as_vector(x, dim, name="vector"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise InvalidInputError(f"{name} has shape {x.shape}, expected ({dim},)")
    return x


class ConstraintSet:
    """Base class. Subclasses implement ``_lmo_min`` for the minimizing sense."""

    dim: int

    def lmo(self, d, sense=MINIMIZE):
        """Vertex of the set optimizing ``<v, d>`` in the requested sense."""
        d = _as_vector(d, self.dim, "direction")
        if not np.all(np.isfinite(d)):
            raise InvalidInputError("direction contains non-finite entries")
        if sense == MINIMIZE:
            return self._lmo_min(d)
        if sense == MAXIMIZE:
            return self._lmo_min(-d)
        raise InvalidInputError(f"unknown sense {sense!r}")

    def _lmo_min(self, d):
        raise NotImplementedError

    def contains(self, x, tol=1e-9):
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def radius(self):
        raise NotImplementedError

    @property
    def diameter_is_exact(self):
        return True

    def default_point(self):
        """A feasible starting point (the origin whenever it is feasible)."""
        return np.zeros(self.dim)

    def vertices(self):
        raise NotImplementedError(f"{type(self).__name__} is not a polytope")


@dataclass(frozen=True)
class UnitSimplex(ConstraintSet):
    """``{x >= 0, sum(x) = scale}``."""

    dim: int
    scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.scale <= 0:
            raise InvalidInputError("UnitSimplex needs dim >= 1 and scale > 0")

    def _lmo_min(self, d):
        return kernels.lmo_simplex(d, float(self.scale))

    def contains(self, x, tol=1e-9):
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= -tol) and abs(x.sum() - self.scale) <= tol)

    def diameter(self):
        return self.scale * math.sqrt(2.0) if self.dim > 1 else 0.0

    def radius(self):
        return float(self.scale)

    def default_point(self):
        return np.full(self.dim, self.scale / self.dim)

    def vertices(self):
        return self.scale * np.eye(self.dim)


@dataclass(frozen=True)
class L1Ball(ConstraintSet):
    dim: int
    r: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.r <= 0:
            raise InvalidInputError("L1Ball needs dim >= 1 and radius > 0")

    def _lmo_min(self, d):
        return kernels.lmo_l1(d, float(self.r))

    def contains(self, x, tol=1e-9):
        x = _as_vector(x, self.dim)
        return bool(np.abs(x).sum() <= self.r + tol)

    def diameter(self):
        return 2.0 * self.r

    def radius(self):
        return float(self.r)

    def vertices(self):
        eye = np.eye(self.dim) * self.r
        return np.vstack([eye, -eye])


@dataclass(frozen=True)
class L2Ball(ConstraintSet):
    dim: int
    r: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.r <= 0:
            raise InvalidInputError("L2Ball needs dim >= 1 and radius > 0")

    def _lmo_min(self, d):
        norm = np.linalg.norm(d)
        if norm == 0.0:
            v = np.zeros(self.dim)
            v[0] = -self.r
            return v
        return -self.r * d / norm

    def contains(self, x, tol=1e-9):
        x = _as_vector(x, self.dim)
        return bool(np.linalg.norm(x) <= self.r + tol)

    def diameter(self):
        return 2.0 * self.r

    def radius(self):
        return float(self.r)


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    lower: np.ndarray
    upper: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise InvalidInputError("Box bounds must be equal-length vectors")
        if np.any(lower > upper) or not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise InvalidInputError("Box needs finite bounds with lower <= upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "dim", lower.shape[0])

    def _lmo_min(self, d):
        return kernels.lmo_box(d, self.lower, self.upper)

    def contains(self, x, tol=1e-9):
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def radius(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def default_point(self):
        if self.contains(np.zeros(self.dim), 0.0):
            return np.zeros(self.dim)
        return 0.5 * (self.lower + self.upper)

    def vertices(self):
        corners = itertools.product(*zip(self.lower, self.upper))
        return np.array(list(corners), dtype=float)


@dataclass(frozen=True, eq=False)
class BudgetedBox(ConstraintSet):
    """``{x : 0 <= x <= upper, sum(x) <= budget}``."""

    upper: np.ndarray
    budget: float
    dim: int = field(init=False)

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float)
        if upper.ndim != 1 or upper.size == 0 or np.any(upper < 0):
            raise InvalidInputError("BudgetedBox upper must be a nonnegative vector")
        if not 0 < self.budget <= upper.sum():
            raise InvalidInputError("BudgetedBox budget must satisfy 0 < b <= sum(upper)")
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "budget", float(self.budget))
        object.__setattr__(self, "dim", upper.shape[0])
        object.__setattr__(self, "_cache", {})

    def _lmo_min(self, d):
        # the minimizing sense maximizes -d
        return kernels.lmo_budgeted_box(-d, self.upper, self.budget)

    def contains(self, x, tol=1e-9):
        x = _as_vector(x, self.dim)
        return bool(
            np.all(x >= -tol) and np.all(x <= self.upper + tol) and x.sum() <= self.budget + tol
        )

    def vertices(self):
        """All vertices: full coordinates on a subset plus at most one partial."""
        if "vertices" in self._cache:
            return self._cache["vertices"]
        if self.dim > _EXACT_DIM_LIMIT:
            raise InvalidInputError(
                f"vertex enumeration limited to dim <= {_EXACT_DIM_LIMIT}"
            )
        tol = 1e-12
        found = {}
        for mask in range(1 << self.dim):
            members = [i for i in range(self.dim) if mask >> i & 1]
            used = self.upper[members].sum()
            if used > self.budget + tol:
                continue
            base = np.zeros(self.dim)
            base[members] = self.upper[members]
            found[tuple(base)] = base
            left = self.budget - used
            for j in range(self.dim):
                if not mask >> j & 1 and self.upper[j] > left > tol:
                    v = base.copy()
                    v[j] = left
                    found[tuple(v)] = v
            if len(found) > _EXACT_VERTEX_LIMIT:
                raise InvalidInputError("too many vertices for exhaustive search")
        verts = np.array(list(found.values()))
        self._cache["vertices"] = verts
        return verts

    def _exact_vertices(self):
        try:
            return self.vertices()
        except InvalidInputError:
            return None

    @property
    def diameter_is_exact(self):
        return self._exact_vertices() is not None

    def diameter(self):
        """Exact by vertex-pair search when enumerable, else ``2*||min(u, b)||``."""
        verts = self._exact_vertices()
        if verts is None:
            return 2.0 * float(np.linalg.norm(np.minimum(self.upper, self.budget)))
        return math.sqrt(kernels.max_pairwise_sqdist(np.ascontiguousarray(verts)))

    def radius(self):
        verts = self._exact_vertices()
        if verts is None:
            return float(np.linalg.norm(np.minimum(self.upper, self.budget)))
        return float(np.sqrt((verts ** 2).sum(axis=1).max()))


def make_constraint(kind, dim, **params):
    """Build a set from its config name and parameters."""
    kind = kind.lower()
    if kind in ("simplex", "unit_simplex"):
        return UnitSimplex(dim, float(params.get("scale", 1.0)))
    if kind in ("l1", "l1_ball"):
        return L1Ball(dim, float(params.get("radius", 1.0)))
    if kind in ("l2", "l2_ball"):
        return L2Ball(dim, float(params.get("radius", 1.0)))
    if kind == "box":
        lower = np.broadcast_to(np.asarray(params.get("lower", 0.0), float), (dim,))
        upper = np.broadcast_to(np.asarray(params.get("upper", 1.0), float), (dim,))
        return Box(lower.copy(), upper.copy())
    if kind in ("budgeted_box", "budget"):
        upper = np.broadcast_to(np.asarray(params.get("upper", 1.0), float), (dim,))
        if "budget" not in params:
            raise InvalidInputError("budgeted_box needs a budget")
        return BudgetedBox(upper.copy(), float(params["budget"]))
    raise InvalidInputError(f"unknown constraint kind {kind!r}")
