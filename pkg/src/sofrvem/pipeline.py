"""End-to-end fitting: standardize, build bases, restart-fit, bands, rescale."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .basis import make_basis
from .data import rescale_results, standardize
from .engine import restart_fit
from .errors import InputError
from .posterior import credible_bands
from .state import PriorConfig


@dataclass
class BandConfig:
    n_samples: int = 200
    level: float = 0.95

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise InputError("bands.n_samples must be positive")
        if not 0 < self.level <= 1:
            raise InputError("bands.level must lie in (0, 1]")


@dataclass
class FitConfig:
    """Everything needed to fit one dataset besides the data itself."""

    K: int = 4
    prior: PriorConfig = field(default_factory=PriorConfig)
    n_restarts: int = 1
    seed: int = 0
    partial: bool = False
    bands: Optional[BandConfig] = None
    degree: int = 3

    def __post_init__(self):
        if int(self.n_restarts) < 1:
            raise InputError("n_restarts must be at least 1")


def bases_for(dataset, K, degree=3):
    """One basis per covariate spanning that covariate's grid."""
    return [make_basis((c.grid[0], c.grid[-1]), K, degree, c.grid) for c in dataset.covariates]


def fit_dataset(dataset, config):
    """Fit ``dataset`` (original scale) and return an original-scale FitResult.

    Bands, when requested, are sampled on the standardized scale with
    ``config.seed`` and rescaled like the point estimates.
    """
    if config.partial and dataset.q == 0:
        raise InputError("the partially functional model needs scalar covariates")
    if not config.partial and dataset.q > 0:
        raise InputError("scalar covariates were supplied; enable the partial model")
    std, record = standardize(dataset)
    bases = bases_for(std, config.K, config.degree)
    fit = restart_fit(std, bases, config.prior, config.n_restarts, config.seed, config.partial)
    if config.bands is not None:
        fit.bands = credible_bands(fit.state, bases, config.bands.n_samples,
                                   config.bands.level, seed=config.seed)
    return rescale_results(fit, record)
