"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so either backend
can be selected at import time.
"""
import math

import numpy as np


def bspline_basis(knots, degree, x):
    """Evaluate all B-spline basis functions at ``x`` (Cox-de Boor).

    Uses the triangular recursion on the non-zero functions of the knot span
    containing each point, vectorized over points.  The right end of the
    domain is closed so the last basis function equals one there.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    n_basis = knots.size - degree - 1
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, degree, n_basis - 1)

    N = np.zeros((degree + 1, x.size))
    N[0] = 1.0
    left = np.zeros((degree + 1, x.size))
    right = np.zeros((degree + 1, x.size))
    for j in range(1, degree + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = np.zeros(x.size)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved

    out = np.zeros((x.size, n_basis))
    rows = np.arange(x.size)
    for r in range(degree + 1):
        out[rows, span - degree + r] = N[r]
    return out


def inclusion_sweep(pz, block_sums, cross, prior_logit, e_inv_sigma2, eps):
    """Sequential coordinate update of Bernoulli inclusion probabilities.

    ``pz`` is updated in place in index order; each update sees the values
    already refreshed earlier in the sweep.

    Parameters
    ----------
    pz : ndarray (p,)
    block_sums : ndarray (p, p)
        Block sums of ``(Sigma + mu mu') * G`` where ``G`` is the Gram matrix.
    cross : ndarray (p,)
        Per-block inner product of the mean with ``design' residual``.
    prior_logit : ndarray (p,)
        ``E log theta - E log(1 - theta)`` for each indicator.
    """
    p = pz.shape[0]
    for j in range(p):
        delta = -2.0 * cross[j] + block_sums[j, j]
        acc = 0.0
        for l in range(p):
            if l != j:
                acc += pz[l] * block_sums[j, l]
        delta += 2.0 * acc
        u = -0.5 * e_inv_sigma2 * delta + prior_logit[j]
        if u >= 0.0:
            prob = 1.0 / (1.0 + math.exp(-u))
        else:
            e = math.exp(u)
            prob = e / (1.0 + e)
        pz[j] = min(max(prob, eps), 1.0 - eps)
    return pz
