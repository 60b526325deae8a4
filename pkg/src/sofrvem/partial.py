"""Variational EM for partially functional regression.

Adds scalar covariates ``X^S`` with effects ``alpha_l``, inclusion indicators
``u_l ~ Bernoulli(theta_ul)``, ``theta_ul ~ Beta(0.5, 0.5)`` and local scales
``nu^2_l ~ Exponential(lambda^2_alpha_l / 2)`` to the functional-only model.
With no scalar covariates every update reduces to its functional-only
counterpart operation for operation.
"""
from __future__ import annotations

import numpy as np

from . import engine
from ._kernels import inclusion_sweep
from .engine import (
    Problem, beta_block, beta_log_moments, bernoulli_block, compute_elbo,
    expected_residual_quadform, gaussian_block, gig_half_moments, omega_matrix,
    scale_block, shrinkage_term, update_tau2, update_theta,
)
from .errors import InputError, NumericalError
from .state import CHI_FLOOR, PROB_EPS, ElboTrace, PartialState, PriorConfig

update_theta_u = update_theta


def functional_target(state, problem):
    """``W'(y - X^S E(U) E(alpha))``, the target of the q(b) and q(Z) updates."""
    if problem.q == 0:
        return problem.Wty
    return problem.Wty - problem.WtXs @ (state.pu * state.mu_alpha)


def scalar_target(state, problem):
    """``X^S'(y - W E(Gamma) E(b))``."""
    return problem.Xsy - problem.WtXs.T @ (state.pz_expanded * state.mu_b)


def update_b_partial(state, problem, jitter=0.0):
    """q(b) with the response replaced by the scalar-part residual."""
    return engine.update_b(state, problem, functional_target(state, problem), jitter)


def update_alpha(state, problem, jitter=0.0):
    """Optimal q(alpha) = MVN(mu_alpha, Sigma_alpha).

    ``M = E diag(1/nu^2) + (X^S'X^S) * Omega_u`` and
    ``mu_alpha = M^{-1} E(U) X^S'(y - W E(Gamma) E(b))``.
    """
    q = problem.q
    if q == 0:
        return np.zeros(0), np.zeros((0, 0))
    _, e_inv_nu, _ = gig_half_moments(state.chi_alpha, state.psi_alpha)
    M = np.diag(e_inv_nu) + problem.XsXs * omega_matrix(state.pu)
    mu, M_inv = engine._spd_solve(M, state.pu * scalar_target(state, problem), jitter)
    return mu, M_inv / state.e_inv_sigma2


def expected_residual_partial(state, problem):
    """``E ||y - W Gamma b - X^S U alpha||^2`` under the mean-field posterior."""
    rss = expected_residual_quadform(state, problem)
    if problem.q == 0:
        return rss + 0.0
    ua = state.pu * state.mu_alpha
    second = state.Sigma_alpha + np.outer(state.mu_alpha, state.mu_alpha)
    extra = (-2.0 * problem.Xsy @ ua
             + 2.0 * (state.pz_expanded * state.mu_b) @ problem.WtXs @ ua
             + np.sum(second * problem.XsXs * omega_matrix(state.pu)))
    return float(rss + extra)


def alpha_shrinkage_term(state):
    """``sum_l E(1/nu^2_l) E(alpha_l^2)``."""
    if state.q == 0:
        return 0.0
    _, e_inv_nu, _ = gig_half_moments(state.chi_alpha, state.psi_alpha)
    return float(e_inv_nu @ state.e_alpha2)


def update_sigma2_partial(state, problem, prior, rss=None):
    """q(sigma^2) = IG(delta1*, delta2*) including the scalar-effect terms."""
    n, K, p, q = problem.n, problem.K, state.p, problem.q
    rss = expected_residual_partial(state, problem) if rss is None else rss
    d1 = (n + K * p + q + 2.0 * prior.delta1) / 2.0
    d2 = (rss + shrinkage_term(state) + alpha_shrinkage_term(state) + 2.0 * prior.delta2) / 2.0
    if not d2 > 0:
        raise NumericalError(f"non-positive delta2* ({d2!r}) in q(sigma^2) update")
    return d1, d2


def update_nu2(state):
    """GIG parameters of q(nu^2_l): ``chi = E(alpha^2) E(1/sigma^2)``, ``psi = lambda^2_alpha``."""
    chi = np.maximum(state.e_alpha2 * state.e_inv_sigma2, CHI_FLOOR)
    return chi, np.asarray(state.lambda2_alpha, dtype=float).copy()


def u_logit(state, problem, l):
    """``s_l1 - s_l0`` evaluated from the full expected residual with ``pu_l`` pinned."""
    s = []
    for r in (0.0, 1.0):
        pinned = state.copy()
        pinned.pu[l] = r
        s.append(-0.5 * state.e_inv_sigma2 * expected_residual_partial(pinned, problem))
    e_log_t, e_log_1mt = beta_log_moments(state.theta_u_a[l], state.theta_u_b[l])
    return float((s[1] + e_log_t) - (s[0] + e_log_1mt))


def update_u(state, problem, l):
    """Optimal Bernoulli probability of q(u_l), clamped like the functional indicators."""
    return engine._bernoulli_logit(u_logit(state, problem, l))


def sweep_scalar_inclusion(state, problem):
    """q(theta_ul) then q(u_l) for every scalar covariate in order, in place."""
    if problem.q == 0:
        return
    a, b = update_theta_u(state.pu.copy())
    e_log_t, e_log_1mt = beta_log_moments(a, b)
    second = state.Sigma_alpha + np.outer(state.mu_alpha, state.mu_alpha)
    M = np.ascontiguousarray(second * problem.XsXs)
    cross = np.ascontiguousarray(scalar_target(state, problem) * state.mu_alpha)
    pu = np.ascontiguousarray(state.pu, dtype=float).copy()
    inclusion_sweep(pu, M, cross, np.ascontiguousarray(e_log_t - e_log_1mt),
                    float(state.e_inv_sigma2), PROB_EPS)
    state.theta_u_a, state.theta_u_b, state.pu = a, b, pu


def mstep_lambda_alpha(chi_alpha, psi_alpha):
    """``lambda^2_alpha_l = 2 / E(nu^2_l)``: the single-coefficient case of the lambda step."""
    if np.size(chi_alpha) == 0:
        return np.zeros(0)
    e_nu, _, _ = gig_half_moments(chi_alpha, psi_alpha)
    return 2.0 / e_nu


def compute_elbo_partial(state, problem, prior, rss=None):
    """Functional-model ELBO with the scalar-covariate blocks appended.

    Extra keys: ``alpha``, ``u``, ``theta_u``, ``nu2``.
    """
    rss = expected_residual_partial(state, problem) if rss is None else rss
    _, terms = compute_elbo(state, problem, prior, rss=rss)
    terms["alpha"] = gaussian_block(state.mu_alpha, state.Sigma_alpha, state.chi_alpha,
                                    state.psi_alpha, state.e_inv_sigma2, state.e_log_sigma2)
    terms["u"] = bernoulli_block(state.pu, state.theta_u_a, state.theta_u_b)
    terms["theta_u"] = beta_block(state.theta_u_a, state.theta_u_b)
    terms["nu2"] = scale_block(state.chi_alpha, state.psi_alpha, state.lambda2_alpha)
    elbo = float(sum(terms.values()))
    if not np.isfinite(elbo):
        raise NumericalError("non-finite ELBO", terms=terms)
    return elbo, terms


def initial_partial_state(problem, prior):
    """Functional-model initialization plus scalar factors.

    An explicit ``pz_init`` may have ``p`` entries (scalar indicators start
    at one) or ``p + q`` entries (functional first).
    """
    p, q = problem.p, problem.q
    if isinstance(prior.pz_init, str):
        probs = prior.initial_probs(p + q)
    else:
        raw = np.asarray(prior.pz_init, dtype=float)
        if raw.size == p:
            raw = np.concatenate([raw, np.ones(q)])
        if raw.size != p + q:
            raise InputError(f"pz_init has {raw.size} entries, expected {p} or {p + q}")
        probs = np.clip(raw, PROB_EPS, 1.0 - PROB_EPS)
    base = engine.initial_state(problem, prior, pz=probs[:p])
    pu = probs[p:].copy()
    lam_a = prior.lambda2_alpha_init
    if lam_a is None:
        lam_a = prior.lambda2_init if np.ndim(prior.lambda2_init) == 0 else 1.0
    lam_a = np.broadcast_to(np.asarray(lam_a, dtype=float), (q,)).copy()
    a_u, b_u = update_theta_u(pu)
    return PartialState(
        **{k: getattr(base, k) for k in base.__dataclass_fields__},
        mu_alpha=np.zeros(q), Sigma_alpha=np.eye(q), pu=pu, theta_u_a=a_u, theta_u_b=b_u,
        chi_alpha=np.full(q, float(prior.chi_init)), psi_alpha=lam_a.copy(), lambda2_alpha=lam_a,
    )


def run_vem_partial(problem, prior, state=None):
    """Iterate the partially functional updates; returns ``(state, trace, converged)``.

    Order within an iteration: b, alpha, sigma^2, tau^2, nu^2, per-covariate
    theta/Z, per-scalar theta_u/u, the lambda M-steps, then the ELBO.
    """
    state = initial_partial_state(problem, prior) if state is None else state
    trace = ElboTrace()
    converged = False
    for _ in range(int(prior.max_iter)):
        state.mu_b, state.Sigma_b = update_b_partial(state, problem, prior.jitter)
        state.mu_alpha, state.Sigma_alpha = update_alpha(state, problem, prior.jitter)
        state.delta1_star, state.delta2_star = update_sigma2_partial(state, problem, prior)
        state.chi, state.psi = update_tau2(state)
        state.chi_alpha, state.psi_alpha = update_nu2(state)
        engine.sweep_inclusion(state, problem, functional_target(state, problem))
        sweep_scalar_inclusion(state, problem)
        state.lambda2 = engine.mstep_lambda(state.chi, state.psi, problem.K)
        state.psi = np.repeat(state.lambda2, problem.K)
        state.lambda2_alpha = mstep_lambda_alpha(state.chi_alpha, state.psi_alpha)
        state.psi_alpha = state.lambda2_alpha.copy()
        elbo, terms = compute_elbo_partial(state, problem, prior)
        previous = trace.last
        trace.append(elbo, terms)
        if elbo - previous <= prior.tol:
            converged = True
            break
    return state, trace, converged


def fit_partial(dataset, bases, prior=None):
    """Fit the partially functional model to an already standardized dataset."""
    from .data import build_design
    from .posterior import build_fit_result

    prior = PriorConfig() if prior is None else prior
    design = build_design(dataset, bases)
    problem = Problem.build(design.W, dataset.y, design.K, dataset.scalar_matrix())
    state, trace, converged = run_vem_partial(problem, prior)
    return build_fit_result(state, trace, converged, dataset, bases, design)
