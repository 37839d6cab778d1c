# Compiled twins of the functions in _kernels_py.py.
import numpy as np

from libc.math cimport fabs


def sfw_update(const double[::1] d, const double[::1] delta,
               const double[::1] g, double rho):
    cdef Py_ssize_t i, n = d.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double keep = 1.0 - rho
    for i in range(n):
        o[i] = keep * (d[i] + delta[i]) + rho * g[i]
    return out


def momentum_update(const double[::1] d, const double[::1] g, double rho):
    cdef Py_ssize_t i, n = d.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double keep = 1.0 - rho
    for i in range(n):
        o[i] = keep * d[i] + rho * g[i]
    return out


def fw_step(const double[::1] x, const double[::1] v, double eta):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] + eta * (v[i] - x[i])
    return out


def ascent_step(const double[::1] x, const double[::1] v, double eta):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = x[i] + eta * v[i]
    return out


def lmo_simplex(const double[::1] d, double scale):
    cdef Py_ssize_t i, best = 0, n = d.shape[0]
    for i in range(1, n):
        if d[i] < d[best]:
            best = i
    out = np.zeros(n)
    out[best] = scale
    return out


def lmo_l1(const double[::1] d, double radius):
    cdef Py_ssize_t i, best = 0, n = d.shape[0]
    cdef double top = fabs(d[0])
    for i in range(1, n):
        if fabs(d[i]) > top:
            top = fabs(d[i])
            best = i
    out = np.zeros(n)
    out[best] = radius if d[best] < 0 else -radius
    return out


def lmo_box(const double[::1] d, const double[::1] lower,
            const double[::1] upper):
    cdef Py_ssize_t i, n = d.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = upper[i] if d[i] < 0 else lower[i]
    return out


def lmo_budgeted_box(const double[::1] d, const double[::1] upper,
                     double budget):
    cdef Py_ssize_t k, i, n = d.shape[0]
    cdef long[::1] order = np.argsort(-np.asarray(d), kind="stable").astype(np.int_)
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double remaining = budget, take
    for k in range(n):
        i = order[k]
        if d[i] <= 0 or remaining <= 0:
            break
        take = upper[i] if upper[i] < remaining else remaining
        o[i] = take
        remaining -= take
    return out


def multilinear_moments(const double[::1] fvals, const double[::1] p):
    cdef Py_ssize_t dim = p.shape[0]
    cdef Py_ssize_t m, i, j, count = (<Py_ssize_t> 1) << dim
    cdef double value = 0.0, prob, w
    grad_arr = np.zeros(dim)
    hess_arr = np.zeros((dim, dim))
    score_arr = np.empty(dim)
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double[::1] s = score_arr
    for m in range(count):
        prob = 1.0
        for i in range(dim):
            if (m >> i) & 1:
                prob *= p[i]
                s[i] = 1.0 / p[i]
            else:
                prob *= 1.0 - p[i]
                s[i] = -1.0 / (1.0 - p[i])
        w = fvals[m] * prob
        value += w
        for i in range(dim):
            grad[i] += w * s[i]
            for j in range(i + 1, dim):
                hess[i, j] += w * s[i] * s[j]
    for i in range(dim):
        for j in range(i + 1, dim):
            hess[j, i] = hess[i, j]
    return value, grad_arr, hess_arr


def coverage_table(const unsigned char[:, ::1] cover, const double[::1] weights):
    cdef Py_ssize_t dim = cover.shape[0], universe = cover.shape[1]
    cdef Py_ssize_t m, i, e, count = (<Py_ssize_t> 1) << dim
    if dim > 62:
        raise ValueError("coverage tables are limited to 62 items")
    # owners[e] has bit i set when item i covers element e
    owners_arr = np.zeros(universe, dtype=np.int64)
    cdef long long[::1] owners = owners_arr
    for e in range(universe):
        for i in range(dim):
            if cover[i, e]:
                owners[e] |= (<long long> 1) << i
    out = np.zeros(count)
    cdef double[::1] o = out
    cdef double total
    for m in range(count):
        total = 0.0
        for e in range(universe):
            total += weights[e] * ((m & owners[e]) != 0)
        o[m] = total
    return out


def max_pairwise_sqdist(const double[:, ::1] V):
    cdef Py_ssize_t a, b, k, n = V.shape[0], dim = V.shape[1]
    cdef double best = 0.0, acc, diff
    for a in range(n):
        for b in range(a + 1, n):
            acc = 0.0
            for k in range(dim):
                diff = V[a, k] - V[b, k]
                acc += diff * diff
            if acc > best:
                best = acc
    return best
