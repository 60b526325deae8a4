"""Scoring: EMISE, MSE, adjusted R^2, selection proportions, GCV and elbow selection."""
from __future__ import annotations

import numpy as np

from .engine import expected_gamma_wtw, gig_half_moments, omega_matrix
from .errors import InputError, NumericalError
from .state import PartialState


def mse(y, yhat):
    """Mean squared difference between observed and predicted responses."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise InputError("y and yhat have different shapes")
    return float(np.mean((y - yhat) ** 2))


def emise(true_curves, estimated_curves, grid, T=None):
    """Empirical mean integrated squared error per covariate.

    Parameters
    ----------
    true_curves : array_like (p, n_t)
    estimated_curves : array_like (S, p, n_t)
        One set of estimated final curves per replicate.
    grid : array_like (n_t,)
    T : float, optional
        Length of the domain; defaults to the span of ``grid``.

    Returns
    -------
    ndarray (p,)
        ``(1/S) sum_s (T/n_t) sum_m (xi_j(t_m) - xi_hat_j^s(t_m))^2``.
    """
    truth = np.asarray(true_curves, dtype=float)
    est = np.asarray(estimated_curves, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if est.ndim == truth.ndim:
        est = est[None]
    if est.shape[1:] != truth.shape or truth.shape[-1] != grid.size:
        raise InputError("curve arrays do not match each other or the grid")
    T = grid[-1] - grid[0] if T is None else float(T)
    return T / grid.size * np.mean(np.sum((est - truth) ** 2, axis=-1), axis=0)


def adjusted_r2(y, yhat, n_params, n=None):
    """``1 - (n - 1) RSS / ((n - n_params) TSS)`` with ``n_params`` = selected covariates times K."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    n = y.size if n is None else int(n)
    dof = n - n_params
    if dof <= 0:
        raise InputError(f"over-parameterized: n - n_params = {dof}")
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss <= 0:
        raise InputError("response has zero total sum of squares")
    rss = float(np.sum((y - yhat) ** 2))
    return 1.0 - (n - 1) * rss / (dof * tss)


def selection_table(report):
    """Selection proportions from a replication report or a list of replicate records.

    Returns ``{"functional": ndarray, "scalar": ndarray}``.
    """
    records = getattr(report, "records", report)
    if not records:
        raise InputError("no replicates to tabulate")
    functional = np.mean([np.asarray(r["selected"], dtype=float) for r in records], axis=0)
    scalars = [np.asarray(r.get("selected_scalar", []), dtype=float) for r in records]
    scalar = np.mean(scalars, axis=0) if scalars[0].size else np.zeros(0)
    return {"functional": functional, "scalar": scalar}


def effective_df(state, WtW, XsXs=None):
    """Trace of the linear map ``y -> y_hat`` implied by the posterior means.

    With ``D = diag(pz kron 1)`` and ``D_hat`` the selected-mode analogue,
    ``y_hat = W D_hat Q^{-1} D W' y`` for the functional block, giving
    ``tr(Q^{-1} D W'W D_hat)``; scalar covariates contribute the same
    construction with ``M`` in place of ``Q``.  Cross-coupling between the
    two blocks is ignored.
    """
    K = state.K
    _, e_inv_tau, _ = gig_half_moments(state.chi, state.psi)
    Q = np.diag(e_inv_tau) + expected_gamma_wtw(state.pz, WtW, K)
    d = np.repeat(state.pz, K)
    d_hat = np.repeat((state.pz > 0.5).astype(float), K)
    df = float(np.trace(np.linalg.solve(Q, d[:, None] * WtW * d_hat[None, :])))
    if isinstance(state, PartialState) and state.q and XsXs is not None:
        _, e_inv_nu, _ = gig_half_moments(state.chi_alpha, state.psi_alpha)
        M = np.diag(e_inv_nu) + XsXs * omega_matrix(state.pu)
        u_hat = (state.pu > 0.5).astype(float)
        df += float(np.trace(np.linalg.solve(M, state.pu[:, None] * XsXs * u_hat[None, :])))
    return df


def gcv(fit, y, W, Xs=None):
    """Generalized cross-validation ``n RSS / (n - df)^2``.

    ``W`` (and ``Xs``) must be the standardized-scale design the fit was
    computed from; ``y`` and ``fit.fitted`` must share a scale.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    XsXs = None if Xs is None else np.asarray(Xs).T @ np.asarray(Xs)
    df = effective_df(fit.state, W.T @ W, XsXs)
    if n - df <= 0:
        raise NumericalError(f"effective degrees of freedom {df:.3f} reach n = {n}")
    rss = float(np.sum((y - fit.fitted) ** 2))
    return n * rss / (n - df) ** 2


def elbow_select(K_values, gcv_values):
    """Basis size at the elbow of a GCV curve.

    Both axes are min-max normalized; among interior points the one farthest
    from the chord joining the first and last points wins, ties going to the
    smallest K.  Lists of one or two points return the smallest K.
    """
    K = np.asarray(K_values, dtype=float)
    g = np.asarray(gcv_values, dtype=float)
    if K.size == 0 or K.size != g.size:
        raise InputError("K_values and gcv_values must be non-empty and of equal length")
    if not np.all(np.isfinite(g)):
        raise InputError("GCV values must be finite")
    order = np.argsort(K, kind="stable")
    K, g = K[order], g[order]
    if np.any(np.diff(K) == 0):
        raise InputError("duplicate K values")
    if K.size <= 2:
        return int(K[0])

    def _norm(v):
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 0 else np.zeros_like(v)

    x, z = _norm(K), _norm(g)
    dx, dz = x[-1] - x[0], z[-1] - z[0]
    dist = np.abs(dz * (x - x[0]) - dx * (z - z[0])) / np.hypot(dx, dz)
    interior = dist[1:-1]
    best = interior.max()
    idx = int(np.flatnonzero(interior >= best - 1e-12)[0]) + 1
    return int(K[idx])
