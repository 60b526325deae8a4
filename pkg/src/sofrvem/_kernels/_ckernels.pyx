# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback.py`` for the reference versions."""
from libc.math cimport exp
from libc.stdlib cimport malloc, free

import numpy as np


cdef Py_ssize_t _find_span(const double[:] knots, int degree, Py_ssize_t n_basis, double x) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    if x >= knots[n_basis]:
        return n_basis - 1
    if x <= knots[degree]:
        return degree
    lo = degree
    hi = n_basis
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


def bspline_basis(knots, int degree, x):
    cdef const double[:] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n_basis = kv.shape[0] - degree - 1
    cdef Py_ssize_t m = xv.shape[0]
    out = np.zeros((m, n_basis))
    cdef double[:, :] ov = out
    cdef double *N = <double *> malloc((degree + 1) * sizeof(double))
    cdef double *left = <double *> malloc((degree + 1) * sizeof(double))
    cdef double *right = <double *> malloc((degree + 1) * sizeof(double))
    cdef Py_ssize_t i, span
    cdef int j, r
    cdef double saved, temp, xi
    if N == NULL or left == NULL or right == NULL:
        free(N); free(left); free(right)
        raise MemoryError()
    try:
        with nogil:
            for i in range(m):
                xi = xv[i]
                span = _find_span(kv, degree, n_basis, xi)
                N[0] = 1.0
                for j in range(1, degree + 1):
                    left[j] = xi - kv[span + 1 - j]
                    right[j] = kv[span + j] - xi
                    saved = 0.0
                    for r in range(j):
                        temp = N[r] / (right[r + 1] + left[j - r])
                        N[r] = saved + right[r + 1] * temp
                        saved = left[j - r] * temp
                    N[j] = saved
                for r in range(degree + 1):
                    ov[i, span - degree + r] = N[r]
    finally:
        free(N); free(left); free(right)
    return out


def inclusion_sweep(double[:] pz, const double[:, :] block_sums, const double[:] cross,
                    const double[:] prior_logit, double e_inv_sigma2, double eps):
    cdef Py_ssize_t p = pz.shape[0]
    cdef Py_ssize_t j, l
    cdef double delta, acc, u, prob, e
    with nogil:
        for j in range(p):
            delta = -2.0 * cross[j] + block_sums[j, j]
            acc = 0.0
            for l in range(p):
                if l != j:
                    acc = acc + pz[l] * block_sums[j, l]
            delta = delta + 2.0 * acc
            u = -0.5 * e_inv_sigma2 * delta + prior_logit[j]
            if u >= 0.0:
                prob = 1.0 / (1.0 + exp(-u))
            else:
                e = exp(u)
                prob = e / (1.0 + e)
            if prob < eps:
                prob = eps
            if prob > 1.0 - eps:
                prob = 1.0 - eps
            pz[j] = prob
    return np.asarray(pz)
