"""Model parameterization, priors, exact densities, and simulation.

The observation is y_t = (beta + eps_t) exp(h_t/2) with AR(1) log-variance
h; the leverage variant correlates eps_t with the next state shock eta_t
through rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import _kernels

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SvmParams:
    """theta = (mu, phi, sigma2, beta[, rho]); rho None means no leverage."""

    mu: float
    phi: float
    sigma2: float
    beta: float = 0.0
    rho: float | None = None

    @property
    def leverage(self) -> bool:
        return self.rho is not None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def validate(self) -> None:
        if not abs(self.phi) < 1.0:
            raise ValueError("|phi| must be < 1")
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be positive")
        if self.rho is not None and not abs(self.rho) < 1.0:
            raise ValueError("|rho| must be < 1")

    def with_(self, **kw) -> "SvmParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters: mu ~ N(mu0, sigma0^2), (phi+1)/2 ~ Beta(a, b),
    sigma2 ~ IG(n0/2, s0/2), beta ~ N(b0, B0), rho ~ U(-1, 1)."""

    mu0: float = 0.0
    sigma0_sq: float = 9.0
    phi_a: float = 1.0
    phi_b: float = 1.0
    n0: float = 0.001
    s0: float = 0.001
    b0: float = 0.0
    B0: float = 1.0

    def validate(self) -> None:
        for name in ("sigma0_sq", "phi_a", "phi_b", "n0", "s0", "B0"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    def log_pdf_mu(self, mu: float) -> float:
        return -0.5 * (_LOG_2PI + math.log(self.sigma0_sq) + (mu - self.mu0) ** 2 / self.sigma0_sq)

    def log_pdf_phi(self, phi: float) -> float:
        # density of phi when (phi+1)/2 ~ Beta(a, b); includes the 1/2 Jacobian
        if not abs(phi) < 1.0:
            return -math.inf
        a, b = self.phi_a, self.phi_b
        return (
            (a - 1.0) * math.log((1.0 + phi) / 2.0)
            + (b - 1.0) * math.log((1.0 - phi) / 2.0)
            - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
            - math.log(2.0)
        )

    def log_pdf_sigma2(self, sigma2: float) -> float:
        if not sigma2 > 0.0:
            return -math.inf
        a, b = self.n0 / 2.0, self.s0 / 2.0
        return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(sigma2) - b / sigma2

    def log_pdf_beta(self, beta: float) -> float:
        return -0.5 * (_LOG_2PI + math.log(self.B0) + (beta - self.b0) ** 2 / self.B0)

    @staticmethod
    def log_pdf_rho(rho: float) -> float:
        return -math.log(2.0) if abs(rho) < 1.0 else -math.inf

    def log_prior(self, params: SvmParams, include_beta: bool = True) -> float:
        s = self.log_pdf_mu(params.mu) + self.log_pdf_phi(params.phi) + self.log_pdf_sigma2(params.sigma2)
        if include_beta:
            s += self.log_pdf_beta(params.beta)
        if params.leverage:
            s += self.log_pdf_rho(params.rho)
        return s


@dataclass(frozen=True)
class TransformedData:
    """y* = log(y^2 + c) and the sign series d_t = 1{y_t >= 0} - 1{y_t < 0}."""

    ystar: np.ndarray
    d: np.ndarray
    c: float


def transform(y: np.ndarray, c: float = 1e-7) -> TransformedData:
    """Log-square transform with offset c guarding y_t = 0."""
    if not c > 0.0:
        raise ValueError("offset c must be positive")
    y = np.asarray(y, dtype=float)
    ystar = np.log(y**2 + c)
    d = np.where(y >= 0.0, 1.0, -1.0)
    return TransformedData(ystar=ystar, d=d, c=c)


def log_obs_density(y_t, h_t, params: SvmParams):
    """log f(y_t | h_t, theta) = log N(y_t; beta e^{h/2}, e^{h})."""
    y_t = np.asarray(y_t, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    r = y_t - params.beta * np.exp(0.5 * h_t)
    out = -0.5 * (_LOG_2PI + h_t + r**2 * np.exp(-h_t))
    return float(out) if out.ndim == 0 else out


def log_state_transition(h_next, h_t, y_t, params: SvmParams):
    """log f(h_{t+1} | h_t, y_t, theta).

    Mean mu + phi(h_t - mu) plus, with leverage, rho sigma e^{-h_t/2}
    (y_t - beta e^{h_t/2}); variance sigma2 (times 1 - rho^2 with leverage).
    """
    h_next = np.asarray(h_next, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    m = params.mu + params.phi * (h_t - params.mu)
    var = params.sigma2
    if params.leverage:
        m = m + params.rho * params.sigma * np.exp(-0.5 * h_t) * (y_t - params.beta * np.exp(0.5 * h_t))
        var = var * (1.0 - params.rho**2)
    r = h_next - m
    out = -0.5 * (_LOG_2PI + np.log(var) + r**2 / var)
    return float(out) if out.ndim == 0 else out


def log_posterior(h: np.ndarray, params: SvmParams, priors: PriorSpec, y: np.ndarray) -> float:
    """Unnormalized log posterior kernel of (h, theta) given y.

    Written in the collapsed form: Beta and inverse-gamma kernels absorb the
    stationary h_1 factor, the squared-residual sums carry the likelihood.
    """
    params.validate()
    priors.validate()
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    mu, phi, s2, beta = params.mu, params.phi, params.sigma2, params.beta
    a, b = priors.phi_a, priors.phi_b
    n1 = priors.n0 + n
    out = (
        (a - 0.5) * math.log(1.0 + phi)
        + (b - 0.5) * math.log(1.0 - phi)
        - (n1 / 2.0 + 1.0) * math.log(s2)
        - (priors.s0 + (1.0 - phi**2) * (h[0] - mu) ** 2) / (2.0 * s2)
        - 0.5 * float(np.sum(h + (y - beta * np.exp(0.5 * h)) ** 2 * np.exp(-h)))
        - (mu - priors.mu0) ** 2 / (2.0 * priors.sigma0_sq)
        - (beta - priors.b0) ** 2 / (2.0 * priors.B0)
    )
    if params.leverage:
        rho = params.rho
        resid = h[1:] - mu * (1.0 - phi) - phi * h[:-1] - rho * math.sqrt(s2) * (
            y[:-1] - beta * np.exp(0.5 * h[:-1])
        ) * np.exp(-0.5 * h[:-1])
        out += -0.5 * (n - 1) * math.log(1.0 - rho**2) - float(np.sum(resid**2)) / (
            2.0 * s2 * (1.0 - rho**2)
        )
    else:
        resid = h[1:] - mu * (1.0 - phi) - phi * h[:-1]
        out += -float(np.sum(resid**2)) / (2.0 * s2)
    return float(out)


def simulate(params: SvmParams, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw (y, h) of length n; a fixed Generator state reproduces bit-exactly."""
    params.validate()
    if n < 1:
        raise ValueError("n must be >= 1")
    z_init = rng.standard_normal()
    z_eps = rng.standard_normal(n)
    z_state = rng.standard_normal(n - 1) if n > 1 else np.empty(0)
    rho = params.rho if params.leverage else 0.0
    y, h = _kernels.simulate_path(
        params.mu, params.phi, params.sigma2, params.beta, rho, n, z_eps,
        np.concatenate([z_state, np.zeros(1)]), z_init,
    )
    return y, h


def stationary_dist(params: SvmParams) -> stats.rv_continuous:
    """Stationary law of h_t (test oracle)."""
    return stats.norm(loc=params.mu, scale=math.sqrt(params.sigma2 / (1.0 - params.phi**2)))
