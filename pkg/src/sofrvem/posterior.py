"""Posterior summaries: selection, coefficient curves, intercept, predictions, bands."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .basis import trapezoid
from .errors import InputError, NumericalError
from .state import ElboTrace, PartialState


@dataclass
class FitResult:
    """Outcome of a fit, on the standardized or the original scale.

    Attributes
    ----------
    selected : ndarray of int (p,)
        Mode of each q(Z_j).
    pz : ndarray (p,)
    beta_curves : list of ndarray
        Final curves ``Z_j * beta_j(t)`` on each covariate grid.
    partial_curves : list of ndarray
        ``beta_j(t)`` before multiplication by the indicator.
    alpha_hat : ndarray (q,)
        Final scalar effects ``u_l * alpha_l``.
    intercept : float
    fitted : ndarray (n,)
        Predictions for the training observations.
    bands : list of (lower, upper) or None
    scale : {"standardized", "original"}
    """

    selected: np.ndarray
    pz: np.ndarray
    beta_curves: List[np.ndarray]
    partial_curves: List[np.ndarray]
    grids: List[np.ndarray]
    alpha_hat: np.ndarray
    pu: np.ndarray
    selected_scalar: np.ndarray
    intercept: float
    fitted: np.ndarray
    elbo_trace: ElboTrace
    converged: bool
    state: object
    bases: list
    names: List[str] = field(default_factory=list)
    scalar_names: List[str] = field(default_factory=list)
    bands: Optional[list] = None
    scale: str = "standardized"
    record: object = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def elbo(self):
        return self.elbo_trace.last

    @property
    def n_iter(self):
        return len(self.elbo_trace)

    @property
    def partial(self):
        return isinstance(self.state, PartialState)


def select(pz, threshold=0.5):
    """Inclusion decisions: 1 where ``pz > threshold`` (a tie at the threshold excludes)."""
    return (np.asarray(pz, dtype=float) > threshold).astype(int)


def _block(vec, j, K):
    return vec[j * K:(j + 1) * K]


def reconstruct_curves(state, bases, apply_selection=True):
    """Coefficient curves ``B_j mu_bj`` on each basis grid, optionally times ``Z_j``."""
    K = state.K
    zhat = select(state.pz)
    curves = []
    for j, basis in enumerate(bases):
        curve = basis.curve(_block(state.mu_b, j, K))
        if apply_selection:
            curve = curve * zhat[j]
        curves.append(curve)
    return curves


def final_coefficients(state):
    """``(Z_hat kron 1) * mu_b`` and ``U_hat * mu_alpha``."""
    coef = np.repeat(select(state.pz), state.K) * state.mu_b
    if isinstance(state, PartialState) and state.q:
        return coef, select(state.pu) * state.mu_alpha
    return coef, np.zeros(0)


def intercept_from_means(y_mean, curve_means, curves, grids, scalar_means=None, alpha_hat=None):
    """``y_bar - sum_j int X_bar_j(t) xi_j(t) dt - sum_l Xs_bar_l alpha_l`` (trapezoid rule)."""
    value = float(y_mean)
    for m, c, g in zip(curve_means, curves, grids):
        value -= float(trapezoid(np.asarray(m) * np.asarray(c), g))
    if alpha_hat is not None and np.size(alpha_hat):
        value -= float(np.asarray(scalar_means) @ np.asarray(alpha_hat))
    return value


def intercept(fit, y_mean, curve_means, scalar_means=None):
    """Intercept of ``fit`` given the response mean and covariate mean curves."""
    return intercept_from_means(y_mean, curve_means, fit.beta_curves, fit.grids,
                                scalar_means, fit.alpha_hat)


def build_fit_result(state, trace, converged, dataset, bases, design):
    """Assemble a standardized-scale :class:`FitResult` from a converged state."""
    coef, alpha_hat = final_coefficients(state)
    fitted = design.W @ coef
    if alpha_hat.size:
        fitted = fitted + dataset.scalar_matrix() @ alpha_hat
    curves = reconstruct_curves(state, bases, apply_selection=True)
    grids = [np.asarray(b.grid) for b in bases]
    partial = isinstance(state, PartialState)
    pu = state.pu.copy() if partial else np.zeros(0)
    b0 = intercept_from_means(
        dataset.y.mean(), [c.values.mean(axis=0) for c in dataset.covariates], curves, grids,
        dataset.scalar_matrix().mean(axis=0), alpha_hat,
    )
    return FitResult(
        selected=select(state.pz), pz=state.pz.copy(), beta_curves=curves,
        partial_curves=reconstruct_curves(state, bases, apply_selection=False), grids=grids,
        alpha_hat=alpha_hat, pu=pu, selected_scalar=select(pu), intercept=b0, fitted=fitted,
        elbo_trace=trace, converged=bool(converged), state=state, bases=list(bases),
        names=list(dataset.names), scalar_names=list(dataset.scalar_names or []),
    )


def predict(fit, dataset):
    """Predicted responses for ``dataset`` on the scale of ``fit``.

    With a standardization record attached, ``dataset`` is on the original
    scale and is standardized with the stored statistics first.
    """
    from .data import build_design

    if dataset.p != len(fit.bases) or dataset.q != fit.alpha_hat.size:
        raise InputError("dataset covariates do not match the fitted model")
    offset = 0.0
    if fit.record is not None:
        dataset = fit.record.apply(dataset, center_response=False)
        offset = fit.record.y_mean
    design = build_design(dataset, fit.bases)
    coef, alpha_std = final_coefficients(fit.state)
    yhat = offset + design.W @ coef
    if alpha_std.size:
        yhat = yhat + dataset.scalar_matrix() @ alpha_std
    return yhat


def credible_bands(state, bases, n_samples=200, level=0.95, seed=None):
    """Pointwise nearest-rank credible bands for each ``Z_j beta_j(t)``.

    Each draw samples ``Z_j ~ Bernoulli(pz_j)`` and ``b_j`` from the
    ``j``-th diagonal block of ``Sigma_b``.  ``seed`` may be an integer or a
    ``numpy.random.Generator``.
    """
    if not 0 < level <= 1:
        raise InputError("level must lie in (0, 1]")
    if int(n_samples) < 1:
        raise InputError("n_samples must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = state.K
    lo_q, hi_q = (1.0 - level) / 2.0, 1.0 - (1.0 - level) / 2.0
    bands = []
    for j, basis in enumerate(bases):
        sl = slice(j * K, (j + 1) * K)
        cov = state.Sigma_b[sl, sl]
        try:
            L = np.linalg.cholesky(0.5 * (cov + cov.T))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"covariance block of covariate {j + 1} is not positive definite") from exc
        z = rng.random(int(n_samples)) < state.pz[j]
        draws = state.mu_b[sl] + rng.standard_normal((int(n_samples), K)) @ L.T
        curves = z[:, None] * (draws @ basis.B.T)
        lower = np.quantile(curves, lo_q, axis=0, method="inverted_cdf")
        upper = np.quantile(curves, hi_q, axis=0, method="inverted_cdf")
        bands.append((lower, upper))
    return bands
