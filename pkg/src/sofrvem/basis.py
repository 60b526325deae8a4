"""Cubic B-spline systems, trapezoid quadrature and regression-spline fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import bspline_basis
from .errors import InputError


def trapezoid_weights(grid):
    """Composite trapezoid weights ``w`` such that ``w @ f`` integrates ``f``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InputError("trapezoid rule needs a 1-D grid with at least 2 points")
    h = np.diff(grid)
    w = np.zeros(grid.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def trapezoid(values, grid):
    """Integrate sampled ``values`` over ``grid`` with the trapezoid rule.

    ``values`` may be 1-D (one function) or 2-D with functions along rows.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if values.shape[-1] != grid.size:
        raise InputError(
            f"length mismatch: {values.shape[-1]} values for {grid.size} grid points"
        )
    return values @ trapezoid_weights(grid)


def clamped_knots(domain, K, degree):
    """Clamped knot vector with ``K - degree - 1`` equally spaced interior knots."""
    lo, hi = float(domain[0]), float(domain[1])
    n_interior = K - degree - 1
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


@dataclass(frozen=True)
class BasisSystem:
    """A B-spline basis evaluated on a grid, plus its cross-product matrix.

    Attributes
    ----------
    degree : int
    K : int
        Number of basis functions.
    knots : ndarray
    domain : tuple of float
    grid : ndarray (n_t,)
    B : ndarray (n_t, K)
        Basis values at the grid points.
    J : ndarray (K, K)
        Trapezoid approximation of the integral of ``B(t) B(t)'``.
    """

    degree: int
    K: int
    knots: np.ndarray
    domain: tuple
    grid: np.ndarray
    B: np.ndarray
    J: np.ndarray

    def evaluate(self, t):
        """Basis values at arbitrary points inside the domain."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return bspline_basis(self.knots, self.degree, t)

    def curve(self, coef):
        """Reconstruct ``B @ coef`` on the grid."""
        return self.B @ np.asarray(coef, dtype=float)


def make_basis(domain, K, degree=3, grid=None):
    """Build a clamped B-spline system on ``domain`` evaluated at ``grid``.

    Parameters
    ----------
    domain : (float, float)
    K : int
        Number of basis functions; must be at least ``degree + 1``.
    degree : int
        Polynomial degree (3 for cubic splines).
    grid : array_like
        Strictly increasing evaluation points inside ``domain``.
    """
    K = int(K)
    degree = int(degree)
    if degree < 0:
        raise InputError("degree must be non-negative")
    if K < degree + 1:
        raise InputError(f"K={K} is too small for degree {degree}; need K >= {degree + 1}")
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise InputError("domain must satisfy t_min < t_max")
    if grid is None:
        raise InputError("an evaluation grid is required")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("grid must be a non-empty 1-D array")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise InputError("grid must be strictly increasing")
    if grid[0] < lo or grid[-1] > hi:
        raise InputError("grid lies outside the domain")

    knots = clamped_knots((lo, hi), K, degree)
    B = bspline_basis(knots, degree, grid)
    J = B.T @ (trapezoid_weights(grid)[:, None] * B)
    J = 0.5 * (J + J.T)
    for arr in (knots, B, J):
        arr.setflags(write=False)
    grid = grid.copy()
    grid.setflags(write=False)
    return BasisSystem(degree=degree, K=K, knots=knots, domain=(lo, hi), grid=grid, B=B, J=J)


def smooth_fit(curve_values, basis):
    """Least-squares basis coefficients for curves sampled on ``basis.grid``.

    Returns an ``(n, K)`` matrix whose row ``i`` minimizes
    ``||curve_values[i] - B @ a||^2``.
    """
    X = np.atleast_2d(np.asarray(curve_values, dtype=float))
    B = basis.B
    if X.shape[1] != B.shape[0]:
        raise InputError(
            f"curves have {X.shape[1]} grid values but the basis grid has {B.shape[0]}"
        )
    if B.shape[0] < basis.K:
        raise InputError(f"grid has {B.shape[0]} points, fewer than K={basis.K}")
    Q, R = np.linalg.qr(B)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * diag.max():
        raise InputError("basis matrix is rank deficient on this grid; grid too coarse for K")
    coef = np.linalg.solve(R, Q.T @ X.T)
    return coef.T
