"""Variational EM for Bayesian variable selection in scalar-on-function and
partially functional regression."""
from ._kernels import BACKEND
from .basis import BasisSystem, make_basis, smooth_fit, trapezoid
from .data import (Covariate, DesignMatrix, FunctionalDataset, StandardizationRecord,
                   build_design, rescale_results, standardize)
from .engine import compute_elbo, fit, gig_half_moments, restart_fit
from .errors import InputError, NumericalError, SofrError
from .partial import fit_partial
from .pipeline import BandConfig, FitConfig, fit_dataset
from .posterior import FitResult, credible_bands, predict, select
from .state import PriorConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BandConfig", "BasisSystem", "Covariate", "DesignMatrix", "FitConfig", "FitResult",
    "FunctionalDataset", "InputError", "NumericalError", "PriorConfig", "SofrError",
    "StandardizationRecord", "build_design", "compute_elbo", "credible_bands", "fit",
    "fit_dataset", "fit_partial", "gig_half_moments", "make_basis", "predict", "rescale_results",
    "restart_fit", "select", "smooth_fit", "standardize", "trapezoid",
]
