"""Datasets, standardization and the basis-space design matrix."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .basis import smooth_fit
from .errors import InputError


@dataclass(frozen=True)
class Covariate:
    """One functional covariate: ``values[i, m]`` is curve ``i`` at ``grid[m]``."""

    grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class FunctionalDataset:
    """Scalar response with functional (and optionally scalar) covariates."""

    y: np.ndarray
    covariates: List[Covariate]
    scalar_covariates: Optional[np.ndarray] = None
    names: Optional[List[str]] = None
    scalar_names: Optional[List[str]] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1:
            raise InputError("response must be a vector")
        if not np.all(np.isfinite(y)):
            raise InputError("response contains non-finite values")
        n = y.size
        covs = []
        for j, cov in enumerate(self.covariates):
            grid = np.asarray(cov.grid, dtype=float)
            values = np.atleast_2d(np.asarray(cov.values, dtype=float))
            if values.shape != (n, grid.size):
                raise InputError(
                    f"covariate {j + 1}: expected shape ({n}, {grid.size}), got {values.shape}"
                )
            if grid.size < 2 or np.any(np.diff(grid) <= 0):
                raise InputError(f"covariate {j + 1}: grid must be strictly increasing")
            if not np.all(np.isfinite(values)):
                raise InputError(f"covariate {j + 1}: non-finite values")
            covs.append(Covariate(grid, values))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", covs)
        if self.scalar_covariates is not None:
            Xs = np.asarray(self.scalar_covariates, dtype=float)
            if Xs.ndim == 1:
                Xs = Xs[:, None]
            if Xs.shape[0] != n:
                raise InputError(f"scalar covariates have {Xs.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(Xs)):
                raise InputError("scalar covariates contain non-finite values")
            object.__setattr__(self, "scalar_covariates", Xs)
        if self.names is None:
            object.__setattr__(self, "names", [f"X{j + 1}" for j in range(len(covs))])
        if self.scalar_names is None and self.scalar_covariates is not None:
            object.__setattr__(
                self, "scalar_names", [f"S{l + 1}" for l in range(self.scalar_covariates.shape[1])]
            )

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return len(self.covariates)

    @property
    def q(self):
        return 0 if self.scalar_covariates is None else self.scalar_covariates.shape[1]

    def scalar_matrix(self):
        """Scalar covariates as an ``(n, q)`` matrix (``q`` may be zero)."""
        if self.scalar_covariates is None:
            return np.zeros((self.n, 0))
        return self.scalar_covariates


@dataclass(frozen=True)
class StandardizationRecord:
    """Pointwise means/SDs used to standardize a dataset."""

    y_mean: float
    curve_means: List[np.ndarray]
    curve_sds: List[np.ndarray]
    scalar_means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scalar_sds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def identity(cls, dataset):
        return cls(
            y_mean=0.0,
            curve_means=[np.zeros(c.grid.size) for c in dataset.covariates],
            curve_sds=[np.ones(c.grid.size) for c in dataset.covariates],
            scalar_means=np.zeros(dataset.q),
            scalar_sds=np.ones(dataset.q),
        )

    def apply(self, dataset, center_response=True):
        """Standardize ``dataset`` with these (already estimated) statistics."""
        self._check(dataset)
        covs = [
            Covariate(c.grid, (c.values - m) / s)
            for c, m, s in zip(dataset.covariates, self.curve_means, self.curve_sds)
        ]
        Xs = dataset.scalar_covariates
        if Xs is not None:
            Xs = (Xs - self.scalar_means) / self.scalar_sds
        y = dataset.y - self.y_mean if center_response else dataset.y
        return replace(dataset, y=y, covariates=covs, scalar_covariates=Xs)

    def invert(self, dataset):
        """Undo :meth:`apply`."""
        self._check(dataset)
        covs = [
            Covariate(c.grid, c.values * s + m)
            for c, m, s in zip(dataset.covariates, self.curve_means, self.curve_sds)
        ]
        Xs = dataset.scalar_covariates
        if Xs is not None:
            Xs = Xs * self.scalar_sds + self.scalar_means
        return replace(dataset, y=dataset.y + self.y_mean, covariates=covs, scalar_covariates=Xs)

    def _check(self, dataset):
        if len(self.curve_means) != dataset.p or self.scalar_means.size != dataset.q:
            raise InputError("standardization record does not match the dataset covariates")


def standardize(dataset):
    """Center the response and standardize every covariate pointwise.

    Returns ``(standardized_dataset, record)``.  Functional covariates are
    centered by their mean curve and divided by their pointwise sample SD
    (``ddof=1``); scalar covariates likewise.
    """
    if dataset.n < 2:
        raise InputError("standardization needs at least two observations")
    means, sds = [], []
    for j, cov in enumerate(dataset.covariates):
        m = cov.values.mean(axis=0)
        s = cov.values.std(axis=0, ddof=1)
        if np.any(s <= 0):
            raise InputError(f"covariate {dataset.names[j]} has zero pointwise SD")
        means.append(m)
        sds.append(s)
    Xs = dataset.scalar_matrix()
    s_means = Xs.mean(axis=0)
    s_sds = Xs.std(axis=0, ddof=1)
    if np.any(s_sds <= 0):
        raise InputError("a scalar covariate has zero SD")
    record = StandardizationRecord(
        y_mean=float(dataset.y.mean()),
        curve_means=means,
        curve_sds=sds,
        scalar_means=s_means,
        scalar_sds=s_sds,
    )
    return record.apply(dataset), record


@dataclass(frozen=True)
class DesignMatrix:
    """Basis-space design ``W`` with ``W[i, block_j] = A_ij' J_j``."""

    W: np.ndarray
    block_index: List[slice]
    WtW: np.ndarray
    coefficients: List[np.ndarray]

    @property
    def K(self):
        return self.block_index[0].stop - self.block_index[0].start

    @property
    def p(self):
        return len(self.block_index)


def build_design(dataset, bases):
    """Assemble the design matrix from regression-spline fits of each covariate."""
    if len(bases) != dataset.p:
        raise InputError(f"need one basis per covariate: got {len(bases)} for {dataset.p}")
    if dataset.p == 0:
        raise InputError("at least one functional covariate is required")
    Ks = {b.K for b in bases}
    if len(Ks) != 1:
        raise InputError("all covariates must use the same number of basis functions")
    K = Ks.pop()
    blocks, coefs, index = [], [], []
    for j, (cov, basis) in enumerate(zip(dataset.covariates, bases)):
        if cov.grid.shape != basis.grid.shape or not np.allclose(cov.grid, basis.grid):
            raise InputError(f"covariate {j + 1}: grid does not match its basis grid")
        A = smooth_fit(cov.values, basis)
        coefs.append(A)
        blocks.append(A @ basis.J)
        index.append(slice(j * K, (j + 1) * K))
    W = np.hstack(blocks)
    WtW = W.T @ W
    WtW = 0.5 * (WtW + WtW.T)
    return DesignMatrix(W=W, block_index=index, WtW=WtW, coefficients=coefs)


def rescale_results(fit, record):
    """Map a standardized-scale fit back to the original data scale.

    Curves and band envelopes are divided pointwise by the covariate SD
    curves, scalar effects by the scalar SDs; the intercept is recomputed
    from the original-scale means; fitted values gain the response mean.
    """
    from .posterior import intercept_from_means

    if len(record.curve_sds) != len(fit.beta_curves) or record.scalar_sds.size != fit.alpha_hat.size:
        raise InputError("standardization record does not match the fit")
    if fit.scale != "standardized":
        raise InputError("fit is already on the original scale")
    curves = [c / s for c, s in zip(fit.beta_curves, record.curve_sds)]
    partial_curves = [c / s for c, s in zip(fit.partial_curves, record.curve_sds)]
    alpha = fit.alpha_hat / record.scalar_sds if fit.alpha_hat.size else fit.alpha_hat.copy()
    bands = None
    if fit.bands is not None:
        bands = [(lo / s, hi / s) for (lo, hi), s in zip(fit.bands, record.curve_sds)]
    b0 = intercept_from_means(record.y_mean, record.curve_means, curves, fit.grids,
                              record.scalar_means, alpha)
    return replace(
        fit, beta_curves=curves, partial_curves=partial_curves, alpha_hat=alpha, bands=bands,
        intercept=b0, fitted=fit.fitted + record.y_mean, scale="original", record=record,
        diagnostics=dict(fit.diagnostics),
    )
