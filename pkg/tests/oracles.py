"""Independent reference implementations used as test oracles.

Everything here is deliberately brute force (dense linear algebra, grids,
quadrature) and shares no code with the library's recursive algorithms.
"""

import math

import numpy as np
from scipy import stats


def ssm_joint_normal(spec):
    """Mean vector and covariance matrix of y* plus the latent-path pieces.

    Represents every h_t and y*_t as an affine function of the underlying
    standard-normal shocks (init, z1_1..z1_n, z2_1..z2_{n-1}) and assembles
    moments by matrix products.
    """
    n = spec.n
    nshock = 1 + n + (n - 1)
    Hc = np.zeros((n, nshock))
    hc = np.zeros(n)
    hc[0] = spec.init_mean
    Hc[0, 0] = math.sqrt(spec.init_var)
    for t in range(n - 1):
        hc[t + 1] = spec.state_intercept[t] + spec.state_ar * hc[t]
        Hc[t + 1] = spec.state_ar * Hc[t]
        Hc[t + 1, 1 + t] += spec.state_obs_loading[t]
        Hc[t + 1, 1 + n + t] += spec.state_sd[t]
    Yc = Hc.copy()
    yc = spec.obs_mean + hc
    for t in range(n):
        Yc[t, 1 + t] += spec.obs_sd[t]
    return {
        "y_mean": yc,
        "y_cov": Yc @ Yc.T,
        "h_mean": hc,
        "h_cov": Hc @ Hc.T,
        "hy_cov": Hc @ Yc.T,
    }


def ssm_loglik_bruteforce(spec, ystar):
    m = ssm_joint_normal(spec)
    return stats.multivariate_normal(m["y_mean"], m["y_cov"]).logpdf(ystar)


def ssm_smoother_bruteforce(spec, ystar):
    """Conditional mean/variance of h given y* by joint-normal conditioning."""
    m = ssm_joint_normal(spec)
    K = m["hy_cov"] @ np.linalg.inv(m["y_cov"])
    mean = m["h_mean"] + K @ (ystar - m["y_mean"])
    cov = m["h_cov"] - K @ m["hy_cov"].T
    return mean, np.diag(cov).copy()


def obs_density(y, h, beta):
    # quadratic written as (y e^{-h/2} - beta)^2 so large |h| underflows cleanly
    r = y * np.exp(-h / 2.0) - beta
    return np.exp(-0.5 * (np.log(2.0 * np.pi) + h + r**2))


def chain_quadrature_loglik(y, params, ngrid=4000, span=10.0):
    """Dense-grid marginalization of the latent path for short series."""
    sd1 = math.sqrt(params.sigma2 / (1.0 - params.phi**2))
    grid = np.linspace(params.mu - span * sd1, params.mu + span * sd1, ngrid)
    dh = grid[1] - grid[0]
    rho = params.rho if params.rho is not None else 0.0
    sig = math.sqrt(params.sigma2)
    a = stats.norm.pdf(grid, params.mu, sd1) * obs_density(y[0], grid, params.beta)
    for t in range(1, len(y)):
        m = params.mu + params.phi * (grid - params.mu)
        if rho != 0.0:
            m = m + rho * sig * np.exp(-grid / 2.0) * (y[t - 1] - params.beta * np.exp(grid / 2.0))
        sv = math.sqrt(params.sigma2 * (1.0 - rho**2))
        tran = stats.norm.pdf(grid[None, :], m[:, None], sv)
        a = (a[:, None] * tran * dh).sum(axis=0) * obs_density(y[t], grid, params.beta)
    return math.log(a.sum() * dh)


def log_chisq1_density_oracle(u, lam):
    """Density of log chi2_1(lam) through scipy's non-central chi-squared."""
    x = np.exp(np.asarray(u, dtype=float))
    if lam == 0.0:
        return stats.chi2.pdf(x, df=1) * x
    return stats.ncx2.pdf(x, df=1, nc=lam) * x


def random_ssm_spec(rng, n, leverage):
    """Random well-conditioned spec for property tests."""
    from svmix.state_space import SsmSpec

    return SsmSpec(
        obs_mean=rng.normal(size=n),
        obs_sd=rng.uniform(0.3, 2.0, size=n),
        state_intercept=rng.normal(size=n) * 0.3,
        state_ar=float(rng.uniform(-0.9, 0.95)),
        state_obs_loading=(rng.normal(size=n) * 0.4 if leverage else np.zeros(n)),
        state_sd=rng.uniform(0.2, 1.0, size=n),
        init_mean=float(rng.normal()),
        init_var=float(rng.uniform(0.5, 2.0)),
    )
