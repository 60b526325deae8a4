"""Variational EM for Bayesian variable selection with functional covariates.

Mean-field factors: q(b) multivariate normal, q(sigma^2) inverse gamma,
q(tau^2_kj) GIG(1/2, chi, psi), q(theta_j) Beta, q(Z_j) Bernoulli.  The
regularization parameters lambda^2_j are point-estimated in an M-step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import betaln, digamma, exp1, gammaln

from ._kernels import inclusion_sweep
from .errors import InputError, NumericalError
from .state import CHI_FLOOR, PROB_EPS, ElboTrace, PriorConfig, VariationalState

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
_BETALN_PRIOR = float(betaln(0.5, 0.5))
#: Shape of the initial q(sigma^2).
INIT_SHAPE = 3.0


@dataclass(frozen=True)
class Problem:
    """Cached sufficient statistics of a (standardized) regression problem."""

    W: np.ndarray
    y: np.ndarray
    K: int
    WtW: np.ndarray
    Wty: np.ndarray
    yty: float
    Xs: np.ndarray
    XsXs: np.ndarray
    Xsy: np.ndarray
    WtXs: np.ndarray

    @classmethod
    def build(cls, W, y, K, Xs=None):
        W = np.asarray(W, dtype=float)
        y = np.asarray(y, dtype=float)
        if W.shape[0] != y.size:
            raise InputError("design and response have different numbers of rows")
        if W.shape[1] % K:
            raise InputError("design column count is not a multiple of K")
        Xs = np.zeros((y.size, 0)) if Xs is None else np.asarray(Xs, dtype=float)
        WtW = W.T @ W
        XsXs = Xs.T @ Xs
        return cls(
            W=W, y=y, K=int(K),
            WtW=0.5 * (WtW + WtW.T), Wty=W.T @ y, yty=float(y @ y),
            Xs=Xs, XsXs=0.5 * (XsXs + XsXs.T), Xsy=Xs.T @ y, WtXs=W.T @ Xs,
        )

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.W.shape[1] // self.K

    @property
    def q(self):
        return self.Xs.shape[1]


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def _scaled_exp1(x):
    """``exp(x) * E1(x)`` without overflow for large ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 600.0
    out[small] = np.exp(x[small]) * exp1(x[small])
    xl = x[~small]
    if xl.size:
        # asymptotic series; truncation error below 10!/x^11
        term = 1.0 / xl
        acc = term.copy()
        for k in range(1, 10):
            term = -term * k / xl
            acc += term
        out[~small] = acc
    return out


def gig_half_moments(chi, psi):
    """Moments of GIG(1/2, chi, psi) with density proportional to
    ``x^(-1/2) exp(-(chi/x + psi x)/2)``.

    Returns ``(E[x], E[1/x], E[log x])``.  The half-order Bessel ratio
    ``K_{3/2}(w)/K_{1/2}(w) = 1 + 1/w`` gives the first two in closed form;
    the log moment uses ``d/dp K_p(w)`` at ``p = 1/2``, which equals
    ``K_{1/2}(w) exp(2w) E1(2w)``.
    """
    chi = np.asarray(chi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if np.any(chi <= 0) or np.any(psi <= 0):
        raise InputError("GIG parameters chi and psi must be positive")
    omega = np.sqrt(chi * psi)
    ratio = np.sqrt(chi / psi)
    e_x = ratio + 1.0 / psi
    e_inv = np.sqrt(psi / chi)
    e_log = np.log(ratio) + _scaled_exp1(2.0 * omega)
    return e_x, e_inv, e_log


def _log_bessel_k_half(omega):
    return 0.5 * np.log(np.pi / (2.0 * omega)) - omega


def gig_entropy_terms(chi, psi):
    """``E_q log q(x)`` for GIG(1/2, chi, psi), elementwise."""
    e_x, e_inv, e_log = gig_half_moments(chi, psi)
    omega = np.sqrt(chi * psi)
    return (0.25 * np.log(psi / chi) - np.log(2.0) - _log_bessel_k_half(omega)
            - 0.5 * e_log - 0.5 * (chi * e_inv + psi * e_x))


def beta_log_moments(a, b):
    """``(E log theta, E log(1 - theta))`` under Beta(a, b)."""
    dab = digamma(np.asarray(a) + np.asarray(b))
    return digamma(a) - dab, digamma(b) - dab


def omega_matrix(pz):
    """``E(Z Z')`` for independent Bernoulli(pz) indicators."""
    pz = np.asarray(pz, dtype=float)
    return np.outer(pz, pz) + np.diag(pz * (1.0 - pz))


def expected_gamma_wtw(pz, WtW, K=None):
    """``E[Gamma W'W Gamma] = (W'W) * (Omega kron 1_{KxK})``.

    Every entry of a covariate's diagonal block carries ``E(Z_j^2) = pz_j``;
    cross blocks carry ``pz_j pz_l``.
    """
    pz = np.asarray(pz, dtype=float)
    WtW = np.asarray(WtW, dtype=float)
    if K is None:
        K = WtW.shape[0] // pz.size
    if WtW.shape != (K * pz.size, K * pz.size):
        raise InputError("WtW shape does not match pz and K")
    return WtW * np.kron(omega_matrix(pz), np.ones((K, K)))


def expected_residual_quadform(state, problem):
    """``E ||y - W Gamma b||^2`` under q(Z) q(b)."""
    pzk = state.pz_expanded
    second = state.Sigma_b + np.outer(state.mu_b, state.mu_b)
    egw = expected_gamma_wtw(state.pz, problem.WtW, problem.K)
    return float(problem.yty - 2.0 * problem.Wty @ (pzk * state.mu_b) + np.sum(second * egw))


# ---------------------------------------------------------------------------
# coordinate updates
# ---------------------------------------------------------------------------

def _spd_solve(Q, rhs, jitter=0.0):
    """Cholesky solve of ``Q x = rhs`` and ``Q^{-1}``; retries once with a ridge."""
    dim = Q.shape[0]
    Qj = Q + jitter * np.eye(dim) if jitter > 0 else Q
    try:
        c = cho_factor(Qj, lower=True)
    except LinAlgError:
        ridge = 1e-8 * np.trace(Q) / dim
        logger.warning("Q not positive definite; retrying with ridge %.3g", ridge)
        try:
            c = cho_factor(Q + (jitter + ridge) * np.eye(dim), lower=True)
        except LinAlgError as exc:
            raise NumericalError("singular precision matrix in q(b) update") from exc
    x = cho_solve(c, rhs)
    inv = cho_solve(c, np.eye(dim))
    return x, 0.5 * (inv + inv.T)


def precision_b(state, problem):
    """``Q = E diag(1/tau^2) + E(Gamma W'W Gamma)``."""
    _, e_inv_tau, _ = gig_half_moments(state.chi, state.psi)
    return np.diag(e_inv_tau) + expected_gamma_wtw(state.pz, problem.WtW, problem.K)


def update_b(state, problem, Wt_target=None, jitter=0.0):
    """Optimal q(b): ``mu = Q^{-1} E(Gamma) W' y``, ``Sigma = (E(1/sigma^2) Q)^{-1}``.

    ``Wt_target`` replaces ``W' y`` (the partially functional model passes
    ``W'(y - X^S E(U) E(alpha))``).
    """
    Wt_target = problem.Wty if Wt_target is None else Wt_target
    Q = precision_b(state, problem)
    mu, Q_inv = _spd_solve(Q, state.pz_expanded * Wt_target, jitter)
    return mu, Q_inv / state.e_inv_sigma2


def shrinkage_term(state):
    """``sum_kj E(1/tau^2_kj) E(b^2_kj)``."""
    _, e_inv_tau, _ = gig_half_moments(state.chi, state.psi)
    return float(e_inv_tau @ state.e_b2)


def update_sigma2(state, problem, prior, rss=None):
    """Optimal q(sigma^2) = IG(delta1*, delta2*)."""
    n, K, p = problem.n, problem.K, state.p
    rss = expected_residual_quadform(state, problem) if rss is None else rss
    d1 = (n + K * p + 2.0 * prior.delta1) / 2.0
    d2 = (rss + shrinkage_term(state) + 2.0 * prior.delta2) / 2.0
    if not d2 > 0:
        raise NumericalError(f"non-positive delta2* ({d2!r}) in q(sigma^2) update")
    return d1, d2


def update_tau2(state):
    """GIG parameters for every q(tau^2_kj): ``chi = E(b^2) E(1/sigma^2)``, ``psi = lambda^2_j``."""
    chi = np.maximum(state.e_b2 * state.e_inv_sigma2, CHI_FLOOR)
    psi = np.repeat(np.asarray(state.lambda2, dtype=float), state.K)
    return chi, psi


def update_theta(pz_j):
    """Beta parameters of q(theta_j) given ``E(Z_j) = pz_j``."""
    return pz_j + 0.5, 2.0 - pz_j - 0.5


def _bernoulli_logit(u1_minus_u0):
    prob = 1.0 / (1.0 + np.exp(-u1_minus_u0)) if u1_minus_u0 >= 0 else (
        np.exp(u1_minus_u0) / (1.0 + np.exp(u1_minus_u0)))
    return float(min(max(prob, PROB_EPS), 1.0 - PROB_EPS))


def z_logit(state, problem, j, Wt_target=None):
    """``u_j1 - u_j0``: expected log-joint difference between Z_j = 1 and Z_j = 0.

    Computed by evaluating the expected residual quadratic form with entry
    ``j`` of the inclusion vector pinned to each value.
    """
    Wt_target = problem.Wty if Wt_target is None else Wt_target
    second = state.Sigma_b + np.outer(state.mu_b, state.mu_b)
    K = problem.K
    u = []
    for r in (0.0, 1.0):
        pz = state.pz.copy()
        pz[j] = r
        egw = expected_gamma_wtw(pz, problem.WtW, K)
        rss = -2.0 * Wt_target @ (np.repeat(pz, K) * state.mu_b) + np.sum(second * egw)
        u.append(-0.5 * state.e_inv_sigma2 * rss)
    e_log_t, e_log_1mt = beta_log_moments(state.theta_a[j], state.theta_b[j])
    return float((u[1] + e_log_t) - (u[0] + e_log_1mt))


def update_z(state, problem, j, Wt_target=None):
    """Optimal Bernoulli probability for q(Z_j), clamped to ``[eps, 1 - eps]``."""
    return _bernoulli_logit(z_logit(state, problem, j, Wt_target))


def block_sums(second, gram, K):
    """Sum of ``second * gram`` over each ``K x K`` covariate block pair."""
    p = gram.shape[0] // K
    return (second * gram).reshape(p, K, p, K).sum(axis=(1, 3))


def sweep_inclusion(state, problem, Wt_target=None):
    """Algorithm-order pass over covariates: q(theta_j) then q(Z_j), in place."""
    Wt_target = problem.Wty if Wt_target is None else Wt_target
    K, p = problem.K, state.p
    a, b = update_theta(state.pz.copy())
    e_log_t, e_log_1mt = beta_log_moments(a, b)
    second = state.Sigma_b + np.outer(state.mu_b, state.mu_b)
    M = np.ascontiguousarray(block_sums(second, problem.WtW, K))
    cross = np.ascontiguousarray((Wt_target * state.mu_b).reshape(p, K).sum(axis=1))
    pz = np.ascontiguousarray(state.pz, dtype=float).copy()
    inclusion_sweep(pz, M, cross, np.ascontiguousarray(e_log_t - e_log_1mt),
                    float(state.e_inv_sigma2), PROB_EPS)
    state.theta_a, state.theta_b, state.pz = a, b, pz


def mstep_lambda(chi, psi, K):
    """Closed-form M-step ``lambda^2_j = 2K / sum_k E(tau^2_kj)``."""
    e_tau, _, _ = gig_half_moments(chi, psi)
    return 2.0 * K / e_tau.reshape(-1, K).sum(axis=1)


# ---------------------------------------------------------------------------
# ELBO
# ---------------------------------------------------------------------------

def bernoulli_block(pz, a, b):
    """``E log p(Z | theta) - E log q(Z)``."""
    pz = np.clip(pz, PROB_EPS, 1.0 - PROB_EPS)
    e_log_t, e_log_1mt = beta_log_moments(a, b)
    return float(np.sum(pz * (e_log_t - e_log_1mt) + e_log_1mt
                        - pz * np.log(pz) - (1.0 - pz) * np.log1p(-pz)))


def beta_block(a, b):
    """``E log p(theta) - E log q(theta)`` against the Beta(0.5, 0.5) prior."""
    e_log_t, e_log_1mt = beta_log_moments(a, b)
    return float(np.sum((0.5 - a) * e_log_t + (0.5 - b) * e_log_1mt
                        + betaln(a, b) - _BETALN_PRIOR))


def gaussian_block(mu, Sigma, chi, psi, e_inv_sigma2, e_log_sigma2):
    """``E log p(coef | sigma^2, scales) - E log q(coef)`` for a Gaussian factor
    whose prior variances are ``sigma^2 * scale`` with GIG(1/2) scales."""
    dim = mu.size
    if dim == 0:
        return 0.0
    _, e_inv, e_log = gig_half_moments(chi, psi)
    e_sq = np.diag(Sigma) + mu ** 2
    sign, logdet = np.linalg.slogdet(Sigma)
    if sign <= 0:
        raise NumericalError("covariance of a Gaussian factor is not positive definite")
    return float(-0.5 * dim * e_log_sigma2 - 0.5 * np.sum(e_log)
                 - 0.5 * e_inv_sigma2 * np.sum(e_inv * e_sq)
                 + 0.5 * logdet + 0.5 * dim)


def scale_block(chi, psi, lambda2_expanded):
    """``E log p(scale | lambda^2) - E log q(scale)`` with Exponential(lambda^2/2) priors."""
    if chi.size == 0:
        return 0.0
    e_x, _, _ = gig_half_moments(chi, psi)
    prior = np.log(lambda2_expanded) - np.log(2.0) - 0.5 * lambda2_expanded * e_x
    return float(np.sum(prior - gig_entropy_terms(chi, psi)))


def sigma2_block(state, prior):
    d1, d2 = state.delta1_star, state.delta2_star
    return float(prior.delta1 * np.log(prior.delta2) - gammaln(prior.delta1)
                 - d1 * np.log(d2) + gammaln(d1)
                 + (d1 - prior.delta1) * state.e_log_sigma2
                 + (d2 - prior.delta2) * state.e_inv_sigma2)


def compute_elbo(state, problem, prior, rss=None):
    """Evidence lower bound and its decomposition into six blocks.

    Returns ``(elbo, terms)`` with keys ``likelihood``, ``z``, ``b``,
    ``theta``, ``sigma2``, ``tau2``.
    """
    n = problem.n
    rss = expected_residual_quadform(state, problem) if rss is None else rss
    e_inv_s2, e_log_s2 = state.e_inv_sigma2, state.e_log_sigma2
    terms = {
        "likelihood": -0.5 * n * LOG_2PI - 0.5 * n * e_log_s2 - 0.5 * e_inv_s2 * rss,
        "z": bernoulli_block(state.pz, state.theta_a, state.theta_b),
        "b": gaussian_block(state.mu_b, state.Sigma_b, state.chi, state.psi, e_inv_s2, e_log_s2),
        "theta": beta_block(state.theta_a, state.theta_b),
        "sigma2": sigma2_block(state, prior),
        "tau2": scale_block(state.chi, state.psi, np.repeat(state.lambda2, state.K)),
    }
    elbo = float(sum(terms.values()))
    if not np.isfinite(elbo):
        raise NumericalError("non-finite ELBO", terms=terms)
    return elbo, terms


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def initial_state(problem, prior, pz=None):
    """Starting point: inclusion probabilities, q(sigma^2), chi and lambda^2."""
    n, K, p = problem.n, problem.K, problem.p
    pz = prior.initial_probs(p) if pz is None else np.clip(np.asarray(pz, float), PROB_EPS, 1 - PROB_EPS)
    lam = np.broadcast_to(np.asarray(prior.lambda2_init, dtype=float), (p,)).copy()
    s2 = prior.sigma2_mean_init
    if s2 is None:
        s2 = float(np.var(problem.y, ddof=1)) if n > 1 else 1.0
        s2 = s2 if s2 > 0 else 1.0
    # IG(3, 2 s2) has mean s2 and variance s2^2: centred on the guess but diffuse
    d1 = INIT_SHAPE
    d2 = s2 * (d1 - 1.0)
    a, b = update_theta(pz)
    return VariationalState(
        mu_b=np.zeros(K * p), Sigma_b=np.eye(K * p), pz=pz, theta_a=a, theta_b=b,
        delta1_star=d1, delta2_star=d2,
        chi=np.full(K * p, float(prior.chi_init)), psi=np.repeat(lam, K), lambda2=lam,
    )


def run_vem(problem, prior, state=None):
    """Iterate the VEM updates until the ELBO increment falls below ``tol``.

    Returns ``(state, trace, converged)``.
    """
    state = initial_state(problem, prior) if state is None else state
    trace = ElboTrace()
    converged = False
    for _ in range(int(prior.max_iter)):
        state.mu_b, state.Sigma_b = update_b(state, problem, jitter=prior.jitter)
        state.delta1_star, state.delta2_star = update_sigma2(state, problem, prior)
        state.chi, state.psi = update_tau2(state)
        sweep_inclusion(state, problem)
        state.lambda2 = mstep_lambda(state.chi, state.psi, problem.K)
        state.psi = np.repeat(state.lambda2, problem.K)
        elbo, terms = compute_elbo(state, problem, prior)
        previous = trace.last
        trace.append(elbo, terms)
        if elbo - previous <= prior.tol:
            converged = True
            break
    return state, trace, converged


def fit(dataset, bases, prior=None, record=None):
    """Fit the functional-only model to an already standardized dataset.

    Returns a :class:`~sofrvem.posterior.FitResult` on the standardized scale.
    """
    from .data import build_design
    from .posterior import build_fit_result

    prior = PriorConfig() if prior is None else prior
    design = build_design(dataset, bases)
    problem = Problem.build(design.W, dataset.y, design.K)
    state, trace, converged = run_vem(problem, prior)
    return build_fit_result(state, trace, converged, dataset, bases, design)


def _tie_key(result, index):
    return (-result.elbo, int(np.sum(result.selected)) + int(np.sum(result.selected_scalar)), index)


def restart_fit(dataset, bases, prior=None, n_restarts=1, seed=0, partial=False):
    """Best-ELBO fit over several initializations of the inclusion probabilities.

    Restart 0 uses ``prior.pz_init``; later restarts draw every initial
    inclusion probability uniformly from {0, 1}.  ELBOs within ``1e-10``
    relative are tied; ties go to fewer selected covariates, then to the
    lower restart index.
    """
    from dataclasses import replace

    if n_restarts < 1:
        raise InputError("n_restarts must be at least 1")
    prior = PriorConfig() if prior is None else prior
    if partial:
        from .partial import fit_partial as fitter
        size = dataset.p + dataset.q
    else:
        fitter = fit
        size = dataset.p
    rng = np.random.default_rng(seed)
    results, failures = [], []
    for r in range(n_restarts):
        cfg = prior if r == 0 else replace(prior, pz_init=rng.integers(0, 2, size=size).astype(float))
        try:
            results.append((r, fitter(dataset, bases, cfg)))
        except NumericalError as exc:
            failures.append((r, str(exc)))
    if not results:
        raise NumericalError(f"all {n_restarts} restarts failed: {failures[0][1]}")
    best_r, best = results[0]
    for r, res in results[1:]:
        scale = max(abs(best.elbo), 1.0)
        if res.elbo > best.elbo + 1e-10 * scale:
            best_r, best = r, res
        elif abs(res.elbo - best.elbo) <= 1e-10 * scale and _tie_key(res, r)[1:] < _tie_key(best, best_r)[1:]:
            best_r, best = r, res
    best.diagnostics["restart_elbos"] = [res.elbo for _, res in results]
    best.diagnostics["best_restart"] = best_r
    best.diagnostics["failed_restarts"] = failures
    return best
