"""Pure NumPy implementations of the numerical kernels.

Selected by :mod:`onesfw.kernels` when the compiled extension is missing or
``ONESFW_PURE_PYTHON`` is set. Every function here has a twin with the same
signature in ``_kernels.pyx``.
"""
import numpy as np


def sfw_update(d, delta, g, rho):
    return (1.0 - rho) * (d + delta) + rho * g


def momentum_update(d, g, rho):
    return (1.0 - rho) * d + rho * g


def fw_step(x, v, eta):
    return x + eta * (v - x)


def ascent_step(x, v, eta):
    return x + eta * v


def lmo_simplex(d, scale):
    v = np.zeros(d.shape[0])
    v[int(np.argmin(d))] = scale
    return v


def lmo_l1(d, radius):
    i = int(np.argmax(np.abs(d)))
    v = np.zeros(d.shape[0])
    v[i] = radius if d[i] < 0 else -radius
    return v


def lmo_box(d, lower, upper):
    # zero entries go to the lower bound
    return np.where(d < 0, upper, lower).astype(float)


def lmo_budgeted_box(d, upper, budget):
    """Maximizing vertex of {0 <= x <= upper, sum(x) <= budget}."""
    v = np.zeros(d.shape[0])
    remaining = budget
    for i in np.argsort(-d, kind="stable"):
        if d[i] <= 0 or remaining <= 0:
            break
        take = min(upper[i], remaining)
        v[i] = take
        remaining -= take
    return v


def _bit_table(dim):
    masks = np.arange(1 << dim)
    return ((masks[:, None] >> np.arange(dim)) & 1).astype(float)


def multilinear_moments(fvals, p):
    """Value, gradient and Hessian of E[f(z)], z_i ~ Bernoulli(p_i).

    Derivatives are taken with respect to ``p``. ``fvals[m]`` is f evaluated
    on the set whose members are the set bits of ``m``.
    """
    dim = p.shape[0]
    bits = _bit_table(dim)
    probs = np.prod(np.where(bits > 0, p, 1.0 - p), axis=1)
    w = fvals * probs
    # score of the Bernoulli product with respect to p
    s = bits / p - (1.0 - bits) / (1.0 - p)
    value = float(w.sum())
    grad = s.T @ w
    hess = (s * w[:, None]).T @ s
    np.fill_diagonal(hess, 0.0)
    return value, grad, hess


def coverage_table(cover, weights):
    dim = cover.shape[0]
    bits = _bit_table(dim)
    covered = (bits @ cover.astype(float)) > 0
    return covered.astype(float) @ weights


def max_pairwise_sqdist(V):
    sq = np.einsum("ij,ij->i", V, V)
    best = 0.0
    for start in range(0, V.shape[0], 1024):
        block = V[start:start + 1024]
        dist = sq[start:start + 1024, None] + sq[None, :] - 2.0 * block @ V.T
        best = max(best, float(dist.max()))
    return max(best, 0.0)
