"""Independent reference computations used as test oracles.

None of these reuse the package's closed forms: GIG moments come from
numerical quadrature, Hadamard expectations from enumerating indicator
configurations, residual expectations from Monte Carlo or enumeration.
"""
import itertools
import warnings

import numpy as np
from scipy import integrate

from sofrvem.engine import Problem
from sofrvem.state import PartialState, VariationalState


def gig_quadrature(chi, psi):
    """``(E x, E 1/x, E log x)`` for GIG(1/2, chi, psi) by adaptive quadrature in ``s = log x``.

    The log-density is shifted by its maximum so the integrand peaks at 1.
    """
    def logf(s):
        # x^{-1/2} exp(-(chi/x + psi x)/2) dx, with dx = x ds
        return 0.5 * s - 0.5 * (chi * np.exp(-s) + psi * np.exp(s))

    mode = np.log((1.0 + np.sqrt(1.0 + 4.0 * chi * psi)) / (2.0 * psi))
    peak = logf(mode)
    lo = min(mode, np.log(chi)) - 12.0
    hi = max(mode, -np.log(psi)) + 12.0

    def moment(g):
        with warnings.catch_warnings():
            # near-zero log moments hit roundoff before epsrel; accuracy is checked by the caller
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda s: g(s) * np.exp(logf(s) - peak), lo, hi,
                                    points=[mode], epsabs=0.0, epsrel=1e-13, limit=500)
        return val

    z = moment(lambda s: 1.0)
    return (moment(np.exp) / z, moment(lambda s: np.exp(-s)) / z, moment(lambda s: s) / z)


def enumerate_gamma_wtw(pz, WtW, K):
    """``sum_Z P(Z) Gamma W'W Gamma`` over all 2^p indicator vectors."""
    p = len(pz)
    out = np.zeros_like(WtW)
    for z in itertools.product((0.0, 1.0), repeat=p):
        z = np.array(z)
        prob = np.prod(np.where(z == 1.0, pz, 1.0 - pz))
        g = np.repeat(z, K)
        out += prob * (g[:, None] * WtW * g[None, :])
    return out


def enumerate_residual(state, problem, pz=None):
    """``E ||y - W Gamma b||^2`` by enumerating Z and integrating b analytically per configuration."""
    pz = state.pz if pz is None else pz
    K = problem.K
    total = 0.0
    for z in itertools.product((0.0, 1.0), repeat=len(pz)):
        z = np.array(z)
        prob = np.prod(np.where(z == 1.0, pz, 1.0 - pz))
        g = np.repeat(z, K)
        Wg = problem.W * g
        r = problem.y - Wg @ state.mu_b
        total += prob * (r @ r + np.trace(Wg.T @ Wg @ state.Sigma_b))
    return total


def monte_carlo_residual(state, problem, draws, rng):
    """Monte Carlo mean and standard error of ``||y - W Gamma b||^2``."""
    K = problem.K
    L = np.linalg.cholesky(state.Sigma_b)
    vals = []
    chunk = 100_000
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        b = state.mu_b + rng.standard_normal((m, state.mu_b.size)) @ L.T
        z = (rng.random((m, state.p)) < state.pz).astype(float)
        g = np.repeat(z, K, axis=1)
        r = problem.y[None, :] - (g * b) @ problem.W.T
        vals.append(np.einsum("ij,ij->i", r, r))
    vals = np.concatenate(vals)
    return vals.mean(), vals.std(ddof=1) / np.sqrt(draws)


def random_spd(rng, dim, scale=0.1):
    A = rng.standard_normal((dim, dim))
    return scale * (A @ A.T / dim + 0.5 * np.eye(dim))


def random_problem(rng, n=8, p=2, K=3, q=0):
    W = rng.standard_normal((n, K * p))
    y = rng.standard_normal(n)
    Xs = rng.standard_normal((n, q)) if q else None
    return Problem.build(W, y, K, Xs)


def random_state(rng, problem, partial=False):
    """A valid but arbitrary variational state for ``problem``."""
    p, K, q = problem.p, problem.K, problem.q
    pz = rng.uniform(0.05, 0.95, p)
    lam = rng.uniform(0.3, 3.0, p)
    kw = dict(
        mu_b=rng.standard_normal(K * p), Sigma_b=random_spd(rng, K * p), pz=pz,
        theta_a=rng.uniform(0.5, 1.5, p), theta_b=rng.uniform(0.5, 1.5, p),
        delta1_star=rng.uniform(2.0, 10.0), delta2_star=rng.uniform(1.0, 10.0),
        chi=rng.uniform(0.1, 2.0, K * p), psi=np.repeat(lam, K), lambda2=lam,
    )
    if not partial:
        return VariationalState(**kw)
    lam_a = rng.uniform(0.3, 3.0, q)
    return PartialState(
        **kw, mu_alpha=rng.standard_normal(q), Sigma_alpha=random_spd(rng, q),
        pu=rng.uniform(0.05, 0.95, q), theta_u_a=rng.uniform(0.5, 1.5, q),
        theta_u_b=rng.uniform(0.5, 1.5, q), chi_alpha=rng.uniform(0.1, 2.0, q),
        psi_alpha=lam_a.copy(), lambda2_alpha=lam_a,
    )


def monte_carlo_elbo(state, problem, prior, draws, rng):
    """Monte Carlo ``E_q[log p(y, b, Z, theta, sigma^2, tau^2) - log q]`` with its standard error.

    Every factor is sampled and every density is evaluated with ``scipy.stats``;
    the scalar-covariate factors are included when ``state`` carries them.
    """
    from scipy import stats

    K, p, n = problem.K, state.p, problem.n
    lam = np.repeat(state.lambda2, K)
    L = np.linalg.cholesky(state.Sigma_b)
    b = state.mu_b + rng.standard_normal((draws, K * p)) @ L.T
    z = (rng.random((draws, p)) < state.pz).astype(float)
    theta = rng.beta(state.theta_a, state.theta_b, size=(draws, p))
    sigma2 = stats.invgamma.rvs(state.delta1_star, scale=state.delta2_star, size=draws, random_state=rng)
    gig = stats.geninvgauss(0.5, np.sqrt(state.chi * state.psi), scale=np.sqrt(state.chi / state.psi))
    tau2 = gig.rvs(size=(draws, K * p), random_state=rng)
    mean = (np.repeat(z, K, axis=1) * b) @ problem.W.T

    log_p = (stats.beta.logpdf(theta, 0.5, 0.5).sum(axis=1)
             + (z * np.log(theta) + (1 - z) * np.log1p(-theta)).sum(axis=1)
             + stats.invgamma.logpdf(sigma2, prior.delta1, scale=prior.delta2)
             + stats.expon.logpdf(tau2, scale=2.0 / lam).sum(axis=1)
             + stats.norm.logpdf(b, 0.0, np.sqrt(sigma2[:, None] * tau2)).sum(axis=1))
    log_q = (stats.multivariate_normal(state.mu_b, state.Sigma_b).logpdf(b)
             + (z * np.log(state.pz) + (1 - z) * np.log1p(-state.pz)).sum(axis=1)
             + stats.beta.logpdf(theta, state.theta_a, state.theta_b).sum(axis=1)
             + stats.invgamma.logpdf(sigma2, state.delta1_star, scale=state.delta2_star)
             + gig.logpdf(tau2).sum(axis=1))
    if isinstance(state, PartialState) and state.q:
        q = state.q
        lam_a = state.lambda2_alpha
        La = np.linalg.cholesky(state.Sigma_alpha)
        alpha = state.mu_alpha + rng.standard_normal((draws, q)) @ La.T
        u = (rng.random((draws, q)) < state.pu).astype(float)
        theta_u = rng.beta(state.theta_u_a, state.theta_u_b, size=(draws, q))
        gig_a = stats.geninvgauss(0.5, np.sqrt(state.chi_alpha * state.psi_alpha),
                                  scale=np.sqrt(state.chi_alpha / state.psi_alpha))
        nu2 = gig_a.rvs(size=(draws, q), random_state=rng)
        mean = mean + (u * alpha) @ problem.Xs.T
        log_p = log_p + (stats.beta.logpdf(theta_u, 0.5, 0.5).sum(axis=1)
                         + (u * np.log(theta_u) + (1 - u) * np.log1p(-theta_u)).sum(axis=1)
                         + stats.expon.logpdf(nu2, scale=2.0 / lam_a).sum(axis=1)
                         + stats.norm.logpdf(alpha, 0.0, np.sqrt(sigma2[:, None] * nu2)).sum(axis=1))
        log_q = log_q + (stats.multivariate_normal(state.mu_alpha, state.Sigma_alpha).logpdf(alpha)
                         + (u * np.log(state.pu) + (1 - u) * np.log1p(-state.pu)).sum(axis=1)
                         + stats.beta.logpdf(theta_u, state.theta_u_a, state.theta_u_b).sum(axis=1)
                         + gig_a.logpdf(nu2).sum(axis=1))
    resid = problem.y[None, :] - mean
    log_p = log_p + (-0.5 * n * np.log(2 * np.pi * sigma2) - 0.5 * np.einsum("ij,ij->i", resid, resid) / sigma2)
    vals = log_p - log_q
    return vals.mean(), vals.std(ddof=1) / np.sqrt(draws)
