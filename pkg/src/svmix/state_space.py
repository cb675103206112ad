"""Conditionally linear Gaussian state space given mixture indicators.

Given the component path s, the transformed observations follow

    y*_t    = obs_mean_t + h_t + obs_sd_t z1_t
    h_{t+1} = state_intercept_t + state_ar h_t + state_obs_loading_t z1_t
              + state_sd_t z2_t
    h_1 ~ N(init_mean, init_var),

with shared z1 coupling the equations when the loading is nonzero (the
leverage model).  The filter handles the coupling by conditioning the
state prediction jointly on each observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError
from .mixture import MixtureGrid, MixtureTable


@dataclass
class SsmSpec:
    """Per-time-step coefficients of the conditional state-space form."""

    obs_mean: np.ndarray
    obs_sd: np.ndarray
    state_intercept: np.ndarray
    state_ar: float
    state_obs_loading: np.ndarray
    state_sd: np.ndarray
    init_mean: float
    init_var: float

    @property
    def n(self) -> int:
        return self.obs_mean.shape[0]

    def validate(self) -> None:
        if not abs(self.state_ar) < 1.0:
            raise ValueError("|state_ar| must be < 1")
        if np.any(self.obs_sd <= 0.0):
            raise ValueError("observation standard deviations must be positive")
        if np.any(self.state_sd < 0.0):
            raise ValueError("state standard deviations must be non-negative")
        if not self.init_var > 0.0:
            raise ValueError("initial variance must be positive")
        lengths = {
            self.obs_mean.shape[0],
            self.obs_sd.shape[0],
            self.state_intercept.shape[0],
            self.state_obs_loading.shape[0],
            self.state_sd.shape[0],
        }
        if len(lengths) != 1:
            raise ValueError("coefficient arrays must share one length")

    def _arrays(self):
        return (
            np.ascontiguousarray(self.obs_mean, dtype=float),
            np.ascontiguousarray(self.obs_sd, dtype=float) ** 2,
            np.ascontiguousarray(self.state_intercept, dtype=float),
            float(self.state_ar),
            np.ascontiguousarray(self.state_obs_loading, dtype=float),
            np.ascontiguousarray(self.state_sd, dtype=float) ** 2,
            float(self.init_mean),
            float(self.init_var),
        )


def ssm_from_mixture(mu: float, phi: float, sigma2: float, beta: float, rho,
                     s1: np.ndarray, s2: np.ndarray,
                     table: MixtureTable, grid: MixtureGrid,
                     d: np.ndarray | None = None) -> SsmSpec:
    """Assemble the spec from parameters and an indicator path.

    ``rho is None`` gives the no-leverage form (zero loading, constant
    intercept mu(1-phi)).  With leverage, the intercept and loading come
    from linearizing exp(eps*/2) inside the conditional state mean, using
    exp(m_ij/2) scaling per component.
    """
    n = s1.shape[0]
    mobs = grid.means[s1, s2]
    vobs = np.sqrt(table.v2[s1])
    sig = np.sqrt(sigma2)
    if rho is None:
        icpt = np.full(n, mu * (1.0 - phi))
        load = np.zeros(n)
        ssd = np.full(n, sig)
    else:
        if d is None:
            raise ValueError("leverage spec requires the sign series d")
        exp_half = np.exp(0.5 * mobs)
        icpt = mu * (1.0 - phi) + rho * sig * (d * table.a[s1] * exp_half - beta)
        load = d * rho * sig * table.b[s1] * vobs * exp_half
        ssd = np.full(n, sig * np.sqrt(1.0 - rho * rho))
    return SsmSpec(
        obs_mean=mobs,
        obs_sd=vobs,
        state_intercept=icpt,
        state_ar=phi,
        state_obs_loading=load,
        state_sd=ssd,
        init_mean=mu,
        init_var=sigma2 / (1.0 - phi * phi),
    )


def kalman_loglik(spec: SsmSpec, ystar: np.ndarray) -> float:
    """log m(y* | spec): the marginal Gaussian log density of the data."""
    y = np.ascontiguousarray(ystar, dtype=float)
    if y.shape[0] != spec.n:
        raise ValueError("ystar length does not match the spec")
    ll, _, _, ok = _kernels.kalman_filter(y, *spec._arrays())
    if not ok:
        raise NumericalError("non-positive prediction variance in the Kalman filter")
    return float(ll)


def simulation_smoother(spec: SsmSpec, ystar: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One exact draw of h from its smoothing distribution."""
    y = np.ascontiguousarray(ystar, dtype=float)
    if y.shape[0] != spec.n:
        raise ValueError("ystar length does not match the spec")
    z = rng.standard_normal(spec.n)
    h, ok = _kernels.simulation_smoother(y, *spec._arrays(), z)
    if not ok:
        raise NumericalError("non-positive prediction variance in the Kalman filter")
    return h


def smoother_moments(spec: SsmSpec, ystar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-t smoothed means and variances (test oracle and reporting)."""
    y = np.ascontiguousarray(ystar, dtype=float)
    if y.shape[0] != spec.n:
        raise ValueError("ystar length does not match the spec")
    ms, vs, ok = _kernels.smoother_moments(y, *spec._arrays())
    if not ok:
        raise NumericalError("non-positive prediction variance in the Kalman filter")
    return ms, vs
