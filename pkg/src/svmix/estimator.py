"""scikit-learn style front end over the MCMC machinery.

``SvmEstimator(model="svm", algorithm="gms").fit(y)`` runs the configured
chain and exposes posterior draws, summaries, and acceptance rates as
trailing-underscore attributes; ``score`` returns the particle-filter
log likelihood at the posterior mean, so model variants can be compared
with the usual sklearn idioms (``get_params``/``set_params``/``clone``).
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .diagnostics import summarize
from .errors import ConfigurationError
from .model import PriorSpec
from .particle import PfConfig, apf_loglik
from .samplers import McmcConfig, run_chain
from .validation import check_series


class SvmEstimator(BaseEstimator):
    """Bayesian volatility(-in-mean) model fit by MCMC.

    Parameters mirror McmcConfig; ``priors`` defaults to the diffuse
    reference setup.  After ``fit``: ``chain_`` (ChainOutput), ``draws_``,
    ``summary_`` (dict of per-parameter ChainSummary), ``params_``
    (posterior-mean SvmParams), ``accept_alpha_``.
    """

    def __init__(self, model="svm", algorithm="gms", n_burnin=10_000, n_draws=50_000,
                 mix_order=2, offset=1e-7, seed=0, flat_proposal_scale=1.0,
                 store_h_indices=(), store_h_thin=0, correction=True, priors=None,
                 n_particles=10_000):
        self.model = model
        self.algorithm = algorithm
        self.n_burnin = n_burnin
        self.n_draws = n_draws
        self.mix_order = mix_order
        self.offset = offset
        self.seed = seed
        self.flat_proposal_scale = flat_proposal_scale
        self.store_h_indices = store_h_indices
        self.store_h_thin = store_h_thin
        self.correction = correction
        self.priors = priors
        self.n_particles = n_particles

    def _config(self) -> McmcConfig:
        return McmcConfig(
            n_burnin=self.n_burnin,
            n_draws=self.n_draws,
            algorithm=self.algorithm,
            model=self.model,
            mix_order=self.mix_order,
            offset=self.offset,
            seed=self.seed,
            flat_proposal_scale=self.flat_proposal_scale,
            store_h_indices=tuple(self.store_h_indices),
            store_h_thin=self.store_h_thin,
            correction=self.correction,
        )

    def fit(self, y, priors=None):
        y = check_series(y)
        pri = priors if priors is not None else (self.priors or PriorSpec())
        chain = run_chain(y, pri, self._config())
        self.chain_ = chain
        self.draws_ = chain.draws
        self.param_names_ = chain.param_names
        self.summary_ = {
            name: summarize(chain.draws[:, i]) for i, name in enumerate(chain.param_names)
        }
        self.params_ = chain.posterior_mean_params()
        self.accept_alpha_ = chain.accept_alpha
        self.accept_correction_ = chain.accept_correction
        self.y_ = y
        return self

    def _check_fitted(self):
        if not hasattr(self, "chain_"):
            raise ConfigurationError("estimator is not fitted; call fit(y) first")

    def score(self, y=None) -> float:
        """Particle-filter log likelihood at the posterior mean."""
        self._check_fitted()
        series = self.y_ if y is None else check_series(y)
        out = apf_loglik(series, self.params_,
                         PfConfig(n_particles=self.n_particles, seed=self.seed))
        return out.loglik
