"""Auxiliary particle filter for the exact likelihood f(y | theta).

The look-ahead first-stage weights adapt particles toward the next
observation before propagation; the averaged second-stage weights are a
consistent estimate of the one-step predictive density, so the summed
log averages estimate the log likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, NumericalError
from .model import SvmParams

RESAMPLERS = ("systematic", "multinomial")


@dataclass
class PfConfig:
    n_particles: int = 80_000
    seed: int = 0
    resampling: str = "systematic"

    def validate(self) -> None:
        if self.n_particles < 2:
            raise ConfigurationError("n_particles must be >= 2")
        if self.resampling not in RESAMPLERS:
            raise ConfigurationError(f"resampling must be one of {RESAMPLERS}")


@dataclass
class PfOutput:
    loglik: float
    logw_bar: np.ndarray  # per-t log predictive density estimates
    dist_fn: np.ndarray  # per-t predictive distribution-function estimates


def apf_loglik(y: np.ndarray, params: SvmParams, config: PfConfig | None = None,
               rng: np.random.Generator | None = None) -> PfOutput:
    """Estimate log f(y | theta) with the auxiliary particle filter."""
    config = config if config is not None else PfConfig()
    config.validate()
    params.validate()
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 1:
        raise ConfigurationError("y must be a non-empty 1-D series")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    rho = params.rho if params.leverage else 0.0
    logwbar, distfn, err_t = _kernels.apf_filter(
        y, params.mu, params.phi, params.sigma2, params.beta, rho,
        config.n_particles, config.resampling == "systematic", rng,
    )
    if err_t >= 0:
        raise NumericalError(f"all particle weights underflowed at t={err_t + 1}")
    return PfOutput(loglik=float(logwbar.sum()), logw_bar=logwbar, dist_fn=distfn)
