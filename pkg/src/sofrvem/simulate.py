"""Simulation designs and multi-seed replication experiments.

Each generator separates two random streams.  Population quantities (mean
basis coefficients of the covariates, the true coefficient curves and
scalar effects) are drawn once from ``truth_seed`` so every replicate of a
scenario shares the same truth.  Observation-level quantities (individual
curves, scalar covariates, noise) come from ``seed``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .basis import make_basis, trapezoid
from .data import Covariate, FunctionalDataset
from .errors import InputError
from .pipeline import FitConfig

logger = logging.getLogger(__name__)

#: Draws of the true coefficients are rejected until the curve's sup-norm
#: (or the absolute scalar effect) reaches this value.
MIN_SIGNAL = 0.5
#: Rate of the exponential prior on the local scales used to draw the truth.
TRUTH_LAMBDA2 = 0.001

PUBLISHED_GRIDS = {
    1: {"n": (50, 100, 200), "sigma2": (0.1, 0.5)},
    2: {"n": (100, 400), "sigma2": (0.01, 0.05)},
    3: {"n": (50, 100), "sigma2": (0.1, 0.5)},
}
FIT_K = {1: 4, 2: 7, 3: 6}


@dataclass
class GroundTruth:
    """True curves, intercept and scalar effects of a simulated dataset."""

    grid: np.ndarray
    curves: List[np.ndarray]
    intercept: float
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    relevant: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    relevant_scalar: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sigma2: float = 0.0
    rejections: int = 0

    def to_dict(self):
        return {
            "grid": self.grid.tolist(),
            "curves": [c.tolist() for c in self.curves],
            "intercept": self.intercept,
            "alpha": self.alpha.tolist(),
            "relevant": self.relevant.tolist(),
            "relevant_scalar": self.relevant_scalar.tolist(),
            "sigma2": self.sigma2,
            "rejections": self.rejections,
            "min_signal": MIN_SIGNAL,
        }


def _streams(study, seed, truth_seed):
    truth = np.random.default_rng([study, 0, int(truth_seed)])
    obs = np.random.default_rng([study, 1, int(seed)])
    return truth, obs


def _draw_truth_coefs(rng, B, sigma2, lambda2=TRUTH_LAMBDA2):
    """Basis coefficients from the hierarchical prior, redrawn until the curve is non-negligible."""
    K = B.shape[1]
    for attempt in range(1000):
        tau2 = rng.exponential(scale=2.0 / lambda2, size=K)
        b = np.sqrt(sigma2 * tau2) * rng.standard_normal(K)
        if np.max(np.abs(B @ b)) >= MIN_SIGNAL:
            return b, attempt
    raise RuntimeError("could not draw a true coefficient curve above the signal threshold")


def _check(n, sigma2):
    if int(n) < 2:
        raise InputError("n must be at least 2")
    if not sigma2 > 0:
        raise InputError("sigma2 must be positive")


def _spline_study(study, n, sigma2, seed, truth_seed, K, n_grid=100):
    """Shared generator of the two B-spline designs (studies 1 and 3)."""
    _check(n, sigma2)
    truth_rng, rng = _streams(study, seed, truth_seed)
    grid = np.linspace(0.0, 1.0, n_grid)
    basis = make_basis((0.0, 1.0), K, 3, grid)
    mean_coefs = [truth_rng.normal(5.0, 10.0, K), truth_rng.normal(2.0, 1.0, K)]
    b1, rejections = _draw_truth_coefs(truth_rng, basis.B, sigma2)
    curves = [basis.curve(b1), np.zeros(n_grid)]
    covs = []
    signal = np.zeros(n)
    for a_j, beta in zip(mean_coefs, curves):
        A = a_j + rng.normal(0.0, 10.0, size=(n, K))
        X = A @ basis.B.T
        covs.append(Covariate(grid, X))
        signal += trapezoid(X * beta, grid)
    return truth_rng, rng, grid, covs, curves, signal, rejections


def gen_sim1(n, sigma2, seed, truth_seed=0):
    """Two B-spline covariates on 100 points; only the first is relevant; intercept 10."""
    _, rng, grid, covs, curves, signal, rej = _spline_study(1, n, sigma2, seed, truth_seed, 4)
    y = 10.0 + signal + rng.normal(0.0, np.sqrt(sigma2), n)
    truth = GroundTruth(grid=grid, curves=curves, intercept=10.0, relevant=np.array([1, 0]),
                        sigma2=float(sigma2), rejections=rej)
    return FunctionalDataset(y, covs), truth


def gen_sim2(n, sigma2, seed, truth_seed=0):
    """Four cosine-series covariates on 81 points; covariates 1 and 3 relevant; intercept 20."""
    _check(n, sigma2)
    _, rng = _streams(2, seed, truth_seed)
    grid = np.linspace(0.0, 1.0, 81)
    gamma = np.vstack([np.ones_like(grid)]
                      + [np.sqrt(2.0) * np.cos(k * np.pi * grid) for k in range(1, 10)])
    sd = 1.0 / np.arange(1, 11)
    curves = [2.0 * np.sin(np.pi * grid), np.zeros_like(grid),
              1.25 * np.sin(3.0 * np.pi * grid), np.zeros_like(grid)]
    covs = []
    signal = np.zeros(n)
    for beta in curves:
        X = 5.0 * (rng.standard_normal((n, 10)) * sd) @ gamma
        covs.append(Covariate(grid, X))
        signal += trapezoid(X * beta, grid)
    y = 20.0 + signal + rng.normal(0.0, np.sqrt(sigma2), n)
    truth = GroundTruth(grid=grid, curves=curves, intercept=20.0,
                        relevant=np.array([1, 0, 1, 0]), sigma2=float(sigma2))
    return FunctionalDataset(y, covs), truth


def gen_sim3(n, sigma2, seed, truth_seed=0):
    """Partially functional design: six-spline covariates plus two scalars; intercept 30."""
    truth_rng, rng, grid, covs, curves, signal, rej = _spline_study(3, n, sigma2, seed, truth_seed, 6)
    for attempt in range(1000):
        nu2 = truth_rng.exponential(scale=2.0 / TRUTH_LAMBDA2)
        alpha2 = float(np.sqrt(sigma2 * nu2) * truth_rng.standard_normal())
        if abs(alpha2) >= MIN_SIGNAL:
            break
    else:
        raise RuntimeError("could not draw a scalar effect above the signal threshold")
    alpha = np.array([0.0, alpha2])
    Xs = np.column_stack([rng.normal(10.0, 2.0, n), rng.normal(20.0, 2.0, n)])
    y = 30.0 + signal + Xs @ alpha + rng.normal(0.0, np.sqrt(sigma2), n)
    truth = GroundTruth(grid=grid, curves=curves, intercept=30.0, alpha=alpha,
                        relevant=np.array([1, 0]), relevant_scalar=np.array([0, 1]),
                        sigma2=float(sigma2), rejections=rej + attempt)
    return FunctionalDataset(y, covs, scalar_covariates=Xs), truth


GENERATORS = {1: gen_sim1, 2: gen_sim2, 3: gen_sim3}


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of a simulation grid: ``S`` replicates with seeds ``seed, seed + 1, ...``."""

    study: int
    n: int
    sigma2: float
    S: int = 1
    seed: int = 0
    truth_seed: int = 0
    custom: bool = False

    def __post_init__(self):
        if self.study not in PUBLISHED_GRIDS:
            raise InputError(f"unknown study {self.study}; expected 1, 2 or 3")
        if int(self.S) < 1:
            raise InputError("S must be at least 1")
        grid = PUBLISHED_GRIDS[self.study]
        if not self.custom and (self.n not in grid["n"] or self.sigma2 not in grid["sigma2"]):
            raise InputError(
                f"(n={self.n}, sigma2={self.sigma2}) is outside the published grid for study "
                f"{self.study}; pass custom=True to allow it"
            )

    def generate(self, index):
        return GENERATORS[self.study](self.n, self.sigma2, self.seed + index, self.truth_seed)


def default_fit_config(scenario, **overrides):
    """Settings used for simulated data: all-one start, sigma^2 guess at its true value."""
    from .state import PriorConfig

    prior = PriorConfig(sigma2_mean_init=float(scenario.sigma2))
    cfg = FitConfig(K=FIT_K[scenario.study], prior=prior, partial=scenario.study == 3)
    return replace(cfg, **overrides)


def integrated_squared_error(truth_curve, estimate, grid):
    """``(T / n_t) sum_m (xi(t_m) - xi_hat(t_m))^2`` for one curve."""
    grid = np.asarray(grid)
    T = grid[-1] - grid[0]
    return float(T / grid.size * np.sum((np.asarray(truth_curve) - np.asarray(estimate)) ** 2))


def run_replicate(scenario, fit_config, index):
    """Generate, fit and score replicate ``index``; returns a plain record."""
    from .metrics import mse
    from .pipeline import fit_dataset

    dataset, truth = scenario.generate(index)
    cfg = replace(fit_config, seed=scenario.seed + index)
    fit = fit_dataset(dataset, cfg)
    return {
        "index": index,
        "seed": scenario.seed + index,
        "mse": mse(dataset.y, fit.fitted),
        "ise": [integrated_squared_error(t, e, truth.grid) for t, e in zip(truth.curves, fit.beta_curves)],
        "selected": fit.selected.tolist(),
        "selected_scalar": fit.selected_scalar.tolist(),
        "pz": fit.pz.tolist(),
        "pu": fit.pu.tolist(),
        "intercept": fit.intercept,
        "alpha_hat": fit.alpha_hat.tolist(),
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "elbo": fit.elbo,
        "elbo_trace": list(fit.elbo_trace.values),
        "beta_curves": [c.tolist() for c in fit.beta_curves],
    }


@dataclass
class ReplicationReport:
    """Per-replicate records and their aggregates for one scenario."""

    scenario: ScenarioSpec
    records: List[dict]
    truth: Optional[GroundTruth] = None

    @property
    def S(self):
        return len(self.records)

    @property
    def mean_mse(self):
        return float(np.mean([r["mse"] for r in self.records]))

    @property
    def emise(self):
        """Per-covariate mean integrated squared error over replicates."""
        return np.mean([r["ise"] for r in self.records], axis=0)

    @property
    def selection_proportions(self):
        return np.mean([r["selected"] for r in self.records], axis=0)

    @property
    def scalar_selection_proportions(self):
        if not self.records or not self.records[0]["selected_scalar"]:
            return np.zeros(0)
        return np.mean([r["selected_scalar"] for r in self.records], axis=0)

    @property
    def intercepts(self):
        return np.array([r["intercept"] for r in self.records])

    def summary(self):
        return {
            "study": self.scenario.study,
            "n": self.scenario.n,
            "sigma2": self.scenario.sigma2,
            "S": self.S,
            "seed": self.scenario.seed,
            "truth_seed": self.scenario.truth_seed,
            "mean_mse": self.mean_mse,
            "emise": self.emise.tolist(),
            "selection": self.selection_proportions.tolist(),
            "scalar_selection": self.scalar_selection_proportions.tolist(),
            "intercept_median": float(np.median(self.intercepts)),
            "intercept_true": self.truth.intercept if self.truth is not None else None,
            "n_converged": int(sum(r["converged"] for r in self.records)),
        }


def _replicate_task(args):
    return run_replicate(*args)


def replicate(scenario, fit_config=None, workers=1):
    """Run all replicates of ``scenario``; results are ordered by replicate index.

    ``workers > 1`` uses a process pool; the output does not depend on it.
    """
    fit_config = default_fit_config(scenario) if fit_config is None else fit_config
    tasks = [(scenario, fit_config, s) for s in range(scenario.S)]
    if workers > 1 and scenario.S > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            records = list(pool.map(_replicate_task, tasks))
    else:
        records = [_replicate_task(t) for t in tasks]
    _, truth = scenario.generate(0)
    return ReplicationReport(scenario=scenario, records=records, truth=truth)
