"""Bayesian stochastic-volatility-in-mean models via the generalized mixture sampler."""

from .diagnostics import ChainSummary, inefficiency_factor, summarize, volatility_proxy
from .errors import ConfigurationError, DataError, NumericalError, SvmixError
from .estimator import SvmEstimator
from .marglik import CjConfig, MarglikResult, chib_marglik, cj_log_posterior_ordinate
from .mixture import (
    MixtureGrid,
    MixtureTable,
    approx_density,
    build_grid,
    default_table,
    exact_log_chisq1_density,
    expected_log_chisq1,
)
from .model import (
    PriorSpec,
    SvmParams,
    TransformedData,
    log_obs_density,
    log_posterior,
    log_state_transition,
    simulate,
    transform,
)
from .particle import PfConfig, PfOutput, apf_loglik
from .samplers import (
    ChainOutput,
    McmcConfig,
    beta_posterior_moments,
    correction_log_ratio,
    correction_mh,
    draw_alpha,
    draw_beta,
    draw_h,
    draw_indicators,
    indicator_probabilities,
    run_chain,
)
from .state_space import (
    SsmSpec,
    kalman_loglik,
    simulation_smoother,
    smoother_moments,
    ssm_from_mixture,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
