"""Normal-mixture representation of the log non-central chi-squared law.

The squared, shifted Gaussian (b + eps)^2 with eps ~ N(0,1) follows a
non-central chi-squared distribution with one degree of freedom and
non-centrality lam = b^2.  Its logarithm admits an infinite series of
tilted central terms; truncating the series and replacing the central
log chi-squared density by the classic ten-component normal mixture
yields a K x (J+1) normal mixture whose component weights depend on b.
This module provides the exact density (with certified truncation
error), the component grid, the mixture density, and a Monte Carlo
estimate of E[log chi2_1(b^2)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

#: Ten-component constants (p_i, m_i, v_i^2, a_i, b_i).  The first three
#: columns define the base mixture for log chi2_1(0); a_i, b_i are the
#: least-squares linearization constants of exp(u/2) around each component,
#: used only by the leverage model.
_TABLE_ROWS = (
    (0.00609, 1.92677, 0.11265, 1.01418, 0.50710),
    (0.04775, 1.34744, 0.17788, 1.02248, 0.51124),
    (0.13057, 0.73504, 0.26768, 1.03403, 0.51701),
    (0.20674, 0.02266, 0.40611, 1.05207, 0.52604),
    (0.22715, -0.85173, 0.62699, 1.08153, 0.54076),
    (0.18842, -1.97278, 0.98583, 1.13114, 0.56557),
    (0.12047, -3.46788, 1.57469, 1.21754, 0.60877),
    (0.05591, -5.55246, 2.54498, 1.37454, 0.68728),
    (0.01575, -8.68384, 4.16591, 1.68327, 0.84163),
    (0.00115, -14.65000, 7.33342, 2.50097, 1.25049),
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureTable:
    """The ten base components (p, m, v2) plus linearization constants (a, b)."""

    p: np.ndarray
    m: np.ndarray
    v2: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def n_components(self) -> int:
        return self.p.shape[0]

    @property
    def v(self) -> np.ndarray:
        return np.sqrt(self.v2)

    def validate(self) -> None:
        if abs(self.p.sum() - 1.0) > 1e-5:
            raise ValueError("component probabilities must sum to 1 within 1e-5")
        if np.any(self.p <= 0.0) or np.any(self.v2 <= 0.0):
            raise ValueError("component probabilities and variances must be positive")
        if np.max(np.abs(self.a - np.exp(self.v2 / 8.0))) > 1e-4:
            raise ValueError("a_i must equal exp(v_i^2/8) within 1e-4")
        if np.max(np.abs(self.b - self.a / 2.0)) > 1e-4:
            raise ValueError("b_i must equal a_i/2 within 1e-4")


def default_table() -> MixtureTable:
    """The compiled-in ten-component table at printed precision."""
    cols = np.array(_TABLE_ROWS, dtype=float)
    table = MixtureTable(
        p=cols[:, 0].copy(),
        m=cols[:, 1].copy(),
        v2=cols[:, 2].copy(),
        a=cols[:, 3].copy(),
        b=cols[:, 4].copy(),
    )
    table.validate()
    return table


@dataclass(frozen=True)
class MixtureGrid:
    """The K x (J+1) component grid for non-centrality ``lam``.

    ``weights[i, j]`` is the normalized probability of component (i, j),
    ``means[i, j] = m_i + j * v_i^2``, and ``variances[i]`` is shared along j.
    ``unnormalized_mass`` keeps the raw weight sum (with its exp(-lam/2) and
    Gamma(1/2) factors) before normalization; it measures how much of the
    series the truncation retains.
    """

    lam: float
    order: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    unnormalized_mass: float
    log_weights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.log_weights is None:
            with np.errstate(divide="ignore"):
                object.__setattr__(self, "log_weights", np.log(self.weights))


def build_grid(beta: float, order: int = 2, table: MixtureTable | None = None) -> MixtureGrid:
    """Component weights and means for non-centrality beta**2, truncated at ``order``.

    Raw weights follow
    ``w_ij = p_i * exp(-lam/2 + m_i j + j^2 v_i^2 / 2) * Gamma(1/2) * (lam/2)^j / (2^j j! Gamma(1/2+j))``
    and are normalized to sum to one.  beta = 0 uses the 0^0 = 1 convention,
    so only the j = 0 column carries weight and the grid reduces to the base
    table.
    """
    if order < 0:
        raise ValueError("truncation order must be >= 0")
    if table is None:
        table = default_table()
    lam = float(beta) ** 2
    K = table.n_components
    j = np.arange(order + 1, dtype=float)
    # log of (lam/2)^j with the 0^0 = 1 convention for lam = 0
    with np.errstate(divide="ignore"):
        log_half_lam_j = j * np.log(lam / 2.0) if lam > 0.0 else np.where(j == 0, 0.0, -np.inf)
    log_w = (
        np.log(table.p)[:, None]
        + (-lam / 2.0 + table.m[:, None] * j[None, :] + 0.5 * table.v2[:, None] * j[None, :] ** 2)
        + math.lgamma(0.5)
        + log_half_lam_j[None, :]
        - j[None, :] * math.log(2.0)
        - np.array([math.lgamma(x + 1.0) + math.lgamma(0.5 + x) for x in j])[None, :]
    )
    w = np.exp(log_w)
    mass = float(w.sum())
    means = table.m[:, None] + j[None, :] * table.v2[:, None]
    return MixtureGrid(
        lam=lam,
        order=order,
        weights=w / mass,
        means=means,
        variances=table.v2.copy(),
        unnormalized_mass=mass,
    )


def approx_density(u, grid: MixtureGrid):
    """Mixture-of-normals density of log chi2_1(lam) evaluated at ``u``.

    Accepts a scalar or an array; returns the same shape.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.sqrt(grid.variances)
    # broadcast (n_u, K, J+1)
    z = (u_arr[:, None, None] - grid.means[None, :, :]) / v[None, :, None]
    dens = grid.weights[None, :, :] * np.exp(-0.5 * z**2) / (v[None, :, None] * math.sqrt(2.0 * math.pi))
    out = dens.sum(axis=(1, 2))
    return out if np.ndim(u) else float(out[0])


def exact_log_chisq1_density(u: float, lam: float, tol: float = 1e-12, max_terms: int = 200) -> float:
    """Exact density of log chi2_1(lam) at ``u`` by certified series summation.

    Sums ``f(u;0) * exp(-lam/2) * sum_j (lam e^u)^j / (2j)!`` (the Poisson
    mixture of tilted central terms collapses to this after simplifying the
    Gamma factors) and stops once a geometric tail bound certifies an
    absolute error below ``tol``.  Raises NumericalError if ``max_terms``
    terms cannot certify ``tol``.
    """
    if not (np.isfinite(u) and np.isfinite(lam)):
        raise ValueError("u and lam must be finite")
    if lam < 0.0:
        raise ValueError("non-centrality lam must be >= 0")
    if tol <= 0.0:
        raise ValueError("tol must be positive")

    # log f(u; 0) = -log sqrt(2 pi) + (u - e^u)/2; e^u may overflow for extreme
    # u, in which case the density underflows to an exact 0 for any usable tol.
    if u > 600.0:
        return 0.0
    log_f0 = -_LOG_SQRT_2PI + 0.5 * (u - math.exp(u))
    if lam == 0.0:
        return math.exp(log_f0)

    log_x = math.log(lam) + u  # x = lam * e^u
    log_terms = [0.0]  # j = 0 term of sum_j x^j/(2j)!
    j = 0
    while True:
        nxt = (j + 1) * log_x - math.lgamma(2 * (j + 1) + 1)
        # tail bound: the term ratio x/((2j+3)(2j+4)) decreases in j, so once
        # it is < 1 the remainder after j is geometrically dominated.
        ratio = math.exp(log_x - math.log((2 * j + 3.0) * (2 * j + 4.0)))
        if ratio < 1.0:
            log_bound = log_f0 - lam / 2.0 + nxt - math.log1p(-ratio)
            if log_bound < math.log(tol):
                break
        j += 1
        if j > max_terms:
            raise NumericalError(
                f"series for log chi2_1 density did not certify tol={tol} within {max_terms} terms"
            )
        log_terms.append(nxt)

    log_terms = np.asarray(log_terms)
    m = log_terms.max()
    log_sum = m + math.log(np.exp(log_terms - m).sum())
    return math.exp(log_f0 - lam / 2.0 + log_sum)


def expected_log_chisq1(beta: float, n_mc: int = 100_000, rng=None) -> tuple[float, float]:
    """Monte Carlo estimate of E[log chi2_1(beta^2)] with its standard error.

    Draws Z ~ N(0,1) and averages log((beta + Z)^2).
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 10^4")
    if rng is None:
        rng = np.random.default_rng(0)
    z = rng.standard_normal(n_mc)
    vals = np.log((beta + z) ** 2)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_mc))
    return est, se
