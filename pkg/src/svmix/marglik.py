"""Log marginal likelihood by the candidate-point identity.

log m(y) = log f(y|theta*) + log pi(theta*) - log pi(theta*|y), evaluated
at the posterior mean theta*.  The likelihood ordinate comes from the
particle filter, the prior ordinate is exact, and the posterior ordinate
is the single-block acceptance-probability estimator applied to the
one-block sampler's output: the numerator averages alpha(v_g -> v*) q(v*)
over posterior draws (v_g, h_g); the denominator averages alpha(v* -> v_j)
over proposal draws v_j paired with latent paths from a reduced run with
theta pinned at theta*.  Both use one fixed proposal, the Laplace fit from
the main run's final iteration, which keeps the identity exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .mixture import build_grid, default_table
from .model import PriorSpec, SvmParams, transform
from .particle import PfConfig, apf_loglik
from .samplers import (
    ChainOutput,
    _log_jacobian,
    mixture_h_step,
    model_flags,
    theta_log_target,
    to_unconstrained,
)


@dataclass
class CjConfig:
    n_reduced_burnin: int = 500
    n_reduced: int = 5_000
    n_batches: int = 10
    pf_reps: int = 10

    def validate(self) -> None:
        if self.n_reduced <= 0 or self.n_reduced_burnin < 0:
            raise ConfigurationError("reduced-run lengths must be positive")
        if self.n_batches < 2:
            raise ConfigurationError("need at least 2 batches")
        if self.pf_reps < 2:
            raise ConfigurationError("need at least 2 particle-filter replications")


@dataclass
class MarglikResult:
    log_marglik: float
    loglik: float
    log_prior: float
    log_posterior: float
    standard_error: float
    se_pf: float
    se_ordinate: float
    theta_star: SvmParams

    def identity_gap(self) -> float:
        return self.log_marglik - (self.loglik + self.log_prior - self.log_posterior)


def _log_mean_exp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if not np.isfinite(m):
        return -math.inf
    return m + math.log(float(np.mean(np.exp(x - m))))


def cj_log_posterior_ordinate(
    num_logt_at_draw: np.ndarray,
    num_logt_at_point: np.ndarray,
    num_logq_at_draw: np.ndarray,
    den_logt_at_point: np.ndarray,
    den_logt_at_draw: np.ndarray,
    den_logq_at_draw: np.ndarray,
    logq_at_point: float,
    n_batches: int = 10,
) -> tuple[float, float]:
    """Acceptance-probability ordinate estimator on the transformed scale.

    Arrays index posterior draws (num_*) and proposal draws (den_*); each
    holds the log target under that draw's latent state, evaluated at the
    draw itself or at the fixed point.  Returns (log ordinate, batch-means
    standard error of the log ordinate).
    """
    num_logt_at_draw = np.asarray(num_logt_at_draw, dtype=float)
    if num_logt_at_draw.shape[0] < n_batches or np.asarray(den_logt_at_draw).shape[0] < n_batches:
        raise ConfigurationError("chain too short for the requested number of batches")
    log_alpha_num = np.minimum(
        0.0, num_logt_at_point - num_logt_at_draw + num_logq_at_draw - logq_at_point
    )
    log_num_terms = logq_at_point + log_alpha_num
    log_alpha_den = np.minimum(
        0.0, den_logt_at_draw - den_logt_at_point + logq_at_point - den_logq_at_draw
    )
    log_ord = _log_mean_exp(log_num_terms) - _log_mean_exp(log_alpha_den)

    nb = n_batches
    num_batches = np.array_split(log_num_terms, nb)
    den_batches = np.array_split(log_alpha_den, nb)
    per_batch = np.array(
        [_log_mean_exp(a) - _log_mean_exp(b) for a, b in zip(num_batches, den_batches)]
    )
    se = float(per_batch.std(ddof=1) / math.sqrt(nb))
    return log_ord, se


def chib_marglik(y: np.ndarray, priors: PriorSpec, model: str,
                 posterior_chain: ChainOutput,
                 pf_config: PfConfig | None = None,
                 cj_config: CjConfig | None = None,
                 rng: np.random.Generator | None = None) -> MarglikResult:
    """Assemble the three ordinates at the posterior mean of theta."""
    pf_config = pf_config if pf_config is not None else PfConfig()
    cj_config = cj_config if cj_config is not None else CjConfig()
    pf_config.validate()
    cj_config.validate()
    leverage, beta_free = model_flags(model)
    if posterior_chain.config.algorithm != "ordinate":
        raise ConfigurationError("the posterior chain must come from the ordinate algorithm")
    if posterior_chain.config.model != model:
        raise ConfigurationError("posterior chain was fit to a different model")
    if posterior_chain.h_paths.shape[0] < cj_config.n_batches:
        raise ConfigurationError(
            "posterior chain stores too few latent paths; rerun with store_h_thin set"
        )
    if posterior_chain.final_proposal is None:
        raise ConfigurationError("posterior chain carries no fitted proposal")
    if rng is None:
        rng = np.random.default_rng(posterior_chain.seed + 1)
    y = np.ascontiguousarray(y, dtype=float)

    theta_star = posterior_chain.posterior_mean_params()
    v_star = to_unconstrained(theta_star, beta_free, leverage)

    # likelihood ordinate: independent pf replications
    reps = np.empty(cj_config.pf_reps)
    for r in range(cj_config.pf_reps):
        reps[r] = apf_loglik(y, theta_star, pf_config, rng).loglik
    loglik = float(reps.mean())
    se_pf = float(reps.std(ddof=1) / math.sqrt(cj_config.pf_reps))

    log_prior = priors.log_prior(theta_star, include_beta=beta_free)

    # fixed proposal from the main run's final Laplace fit
    q_mean, q_cov = posterior_chain.final_proposal
    q_chol = np.linalg.cholesky(q_cov)
    q_logdet = float(np.log(np.diag(q_chol)).sum())
    dim = q_mean.shape[0]

    def log_q(v: np.ndarray) -> float:
        w = np.linalg.solve(q_chol, v - q_mean)
        return -0.5 * (dim * math.log(2.0 * math.pi) + float(w @ w)) - q_logdet

    # numerator terms over stored posterior (theta, h) pairs
    iters = posterior_chain.h_path_iters
    m = iters.shape[0]
    num_at_draw = np.empty(m)
    num_at_point = np.empty(m)
    num_logq = np.empty(m)
    names = posterior_chain.param_names
    for g in range(m):
        row = posterior_chain.draws[iters[g]]
        vals = dict(zip(names, row))
        pg = SvmParams(mu=vals["mu"], phi=vals["phi"], sigma2=vals["sigma2"],
                       beta=vals.get("beta", 0.0), rho=vals["rho"] if leverage else None)
        vg = to_unconstrained(pg, beta_free, leverage)
        hg = posterior_chain.h_paths[g]
        num_at_draw[g] = theta_log_target(vg, hg, y, priors, beta_free, leverage)
        num_at_point[g] = theta_log_target(v_star, hg, y, priors, beta_free, leverage)
        num_logq[g] = log_q(vg)

    # reduced run: theta pinned at theta*, latent path refreshed, proposal draws
    table = default_table()
    tdata = transform(y, posterior_chain.config.offset)
    grid = build_grid(theta_star.beta, posterior_chain.config.mix_order, table)
    h = posterior_chain.h_paths[-1].copy()
    for _ in range(cj_config.n_reduced_burnin):
        h, _acc = mixture_h_step(theta_star, h, tdata, y, grid, rng, table)
    den_at_point = np.empty(cj_config.n_reduced)
    den_at_draw = np.empty(cj_config.n_reduced)
    den_logq = np.empty(cj_config.n_reduced)
    for j in range(cj_config.n_reduced):
        h, _acc = mixture_h_step(theta_star, h, tdata, y, grid, rng, table)
        vj = q_mean + q_chol @ rng.standard_normal(dim)
        den_at_point[j] = theta_log_target(v_star, h, y, priors, beta_free, leverage)
        den_at_draw[j] = theta_log_target(vj, h, y, priors, beta_free, leverage)
        den_logq[j] = log_q(vj)

    log_ord_v, se_ord = cj_log_posterior_ordinate(
        num_at_draw, num_at_point, num_logq,
        den_at_point, den_at_draw, den_logq,
        log_q(v_star), cj_config.n_batches,
    )
    # map the ordinate from the transformed scale back to theta
    log_posterior = log_ord_v - _log_jacobian(v_star, beta_free, leverage)

    log_marglik = loglik + log_prior - log_posterior
    return MarglikResult(
        log_marglik=log_marglik,
        loglik=loglik,
        log_prior=log_prior,
        log_posterior=log_posterior,
        standard_error=math.sqrt(se_pf**2 + se_ord**2),
        se_pf=se_pf,
        se_ordinate=se_ord,
        theta_star=theta_star,
    )
