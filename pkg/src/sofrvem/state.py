"""Configuration and variational-state containers shared by the fitting engines."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Union

import numpy as np
from scipy.special import digamma

from .errors import InputError

#: Clamp for Bernoulli inclusion probabilities.
PROB_EPS = 1e-12
#: Floor on the GIG ``chi`` parameter.
CHI_FLOOR = 1e-12


@dataclass
class PriorConfig:
    """Hyperparameters, initial values and convergence controls.

    ``pz_init`` is ``"all-one"``, ``"random"`` (uniform on {0, 1}, drawn with
    ``seed``) or an explicit vector.  ``sigma2_mean_init`` sets the initial
    mean of q(sigma^2); ``None`` uses the sample variance of the response.
    """

    delta1: float = 0.01
    delta2: float = 0.01
    lambda2_init: Union[float, np.ndarray] = 1.0
    lambda2_alpha_init: Optional[Union[float, np.ndarray]] = None
    tol: float = 0.01
    max_iter: int = 100
    pz_init: Union[str, np.ndarray] = "all-one"
    sigma2_mean_init: Optional[float] = None
    chi_init: float = 1.0
    jitter: float = 0.0
    seed: int = 0

    beta_prior = (0.5, 0.5)

    def __post_init__(self):
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise InputError("delta1 and delta2 must be positive")
        if np.any(np.asarray(self.lambda2_init) <= 0):
            raise InputError("lambda2_init must be positive")
        if self.lambda2_alpha_init is not None and np.any(np.asarray(self.lambda2_alpha_init) <= 0):
            raise InputError("lambda2_alpha_init must be positive")
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if int(self.max_iter) < 1:
            raise InputError("max_iter must be at least 1")
        if self.sigma2_mean_init is not None and self.sigma2_mean_init <= 0:
            raise InputError("sigma2_mean_init must be positive")
        if self.chi_init <= 0:
            raise InputError("chi_init must be positive")
        if self.jitter < 0:
            raise InputError("jitter must be non-negative")
        if isinstance(self.pz_init, str):
            if self.pz_init not in ("all-one", "random"):
                raise InputError(f"unknown pz_init {self.pz_init!r}")
        else:
            pz = np.asarray(self.pz_init, dtype=float)
            if np.any((pz < 0) | (pz > 1)):
                raise InputError("pz_init entries must lie in [0, 1]")

    def initial_probs(self, size, rng=None):
        if isinstance(self.pz_init, str):
            if self.pz_init == "all-one":
                pz = np.ones(size)
            else:
                rng = np.random.default_rng(self.seed) if rng is None else rng
                pz = rng.integers(0, 2, size=size).astype(float)
        else:
            pz = np.asarray(self.pz_init, dtype=float).copy()
            if pz.size != size:
                raise InputError(f"pz_init has {pz.size} entries, expected {size}")
        return np.clip(pz, PROB_EPS, 1.0 - PROB_EPS)


@dataclass
class VariationalState:
    """Parameters of every variational factor for the functional-only model.

    Coefficient-level arrays (``mu_b``, ``chi``, ``psi``) have length ``K p``
    with covariate ``j`` occupying ``[j K, (j + 1) K)``.
    """

    mu_b: np.ndarray
    Sigma_b: np.ndarray
    pz: np.ndarray
    theta_a: np.ndarray
    theta_b: np.ndarray
    delta1_star: float
    delta2_star: float
    chi: np.ndarray
    psi: np.ndarray
    lambda2: np.ndarray

    @property
    def p(self):
        return self.pz.size

    @property
    def K(self):
        return self.mu_b.size // self.pz.size

    @property
    def e_inv_sigma2(self):
        return self.delta1_star / self.delta2_star

    @property
    def e_log_sigma2(self):
        return float(np.log(self.delta2_star) - digamma(self.delta1_star))

    @property
    def pz_expanded(self):
        return np.repeat(self.pz, self.K)

    @property
    def e_b2(self):
        return np.diag(self.Sigma_b) + self.mu_b ** 2

    def copy(self):
        return type(self)(**{
            f.name: (getattr(self, f.name).copy() if isinstance(getattr(self, f.name), np.ndarray)
                     else getattr(self, f.name))
            for f in fields(self)
        })


@dataclass
class PartialState(VariationalState):
    """Variational state extended with the scalar-covariate factors."""

    mu_alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Sigma_alpha: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta_u_a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta_u_b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    chi_alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psi_alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda2_alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def q(self):
        return self.pu.size

    @property
    def e_alpha2(self):
        return np.diag(self.Sigma_alpha) + self.mu_alpha ** 2


@dataclass
class ElboTrace:
    """Per-iteration ELBO values with their block decomposition."""

    values: list = field(default_factory=list)
    terms: list = field(default_factory=list)

    def append(self, value, terms):
        self.values.append(float(value))
        self.terms.append(dict(terms))

    def __len__(self):
        return len(self.values)

    @property
    def last(self):
        return self.values[-1] if self.values else -np.inf
