"""Chain summaries, inefficiency factors, and the volatility proxy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mixture import expected_log_chisq1


@dataclass
class ChainSummary:
    mean: float
    sd: float
    q025: float
    q975: float
    inefficiency: float
    prob_positive: float


def autocorrelations(chain: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocorrelations rho_1..rho_max_lag via FFT."""
    x = np.asarray(chain, dtype=float)
    n = x.shape[0]
    x = x - x.mean()
    var = float(x @ x)
    if var == 0.0:
        return np.full(max_lag, np.nan)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1].real
    return acov[1:] / var


def inefficiency_factor(chain: np.ndarray, bandwidth: int | None = None) -> float:
    """1 + 2 sum_s K(s/B) rho_s with a Parzen lag window, B = sqrt(length).

    Returns NaN for a constant chain (autocorrelation undefined).
    """
    x = np.asarray(chain, dtype=float)
    n = x.shape[0]
    if n < 1000:
        raise ValueError("inefficiency_factor needs a chain of length >= 1000")
    if np.all(x == x[0]):
        return float("nan")
    B = bandwidth if bandwidth is not None else int(math.floor(math.sqrt(n)))
    rho = autocorrelations(x, B)
    s = np.arange(1, B + 1) / B
    kern = np.where(s <= 0.5, 1.0 - 6.0 * s**2 + 6.0 * s**3, 2.0 * (1.0 - s) ** 3)
    return float(1.0 + 2.0 * np.sum(kern * rho))


def summarize(chain: np.ndarray) -> ChainSummary:
    """Moments, central 95% interval, IF, and the positive-draw fraction."""
    x = np.asarray(chain, dtype=float)
    if x.size == 0:
        raise ValueError("chain is empty")
    q025, q975 = np.quantile(x, [0.025, 0.975])
    if x.shape[0] >= 1000:
        ineff = inefficiency_factor(x)
    else:
        ineff = float("nan")
    return ChainSummary(
        mean=float(x.mean()),
        sd=float(x.std(ddof=0)),
        q025=float(q025),
        q975=float(q975),
        inefficiency=ineff,
        prob_positive=float(np.mean(x > 0.0)),
    )


def volatility_proxy(y: np.ndarray, beta_hat: float, half_width: int = 10,
                     n_mc: int = 200_000, rng: np.random.Generator | None = None,
                     offset: float = 0.0) -> np.ndarray:
    """Moving average of z_t = log(y_t^2) - E[log chi2_1(beta_hat^2)].

    Edges shrink the window to the available terms.  ``offset`` guards
    log(0) when the series can contain exact zeros.
    """
    y = np.asarray(y, dtype=float)
    if rng is None:
        rng = np.random.default_rng(0)
    expected, _ = expected_log_chisq1(beta_hat, n_mc=n_mc, rng=rng)
    z = np.log(y**2 + offset) - expected
    n = z.shape[0]
    out = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(z)])
    for t in range(n):
        lo = max(0, t - half_width)
        hi = min(n, t + half_width + 1)
        out[t] = (csum[hi] - csum[lo]) / (hi - lo)
    return out
