"""MCMC algorithms for the volatility-in-mean models.

Four per-iteration cycles share the same blocks:

* ``gms``      beta (conjugate); indicators; alpha (Laplace-proposal MH on
               the Kalman-integrated target); h (simulation smoother).
* ``gmh``      gms plus an exact-correction MH step on the (alpha, h) pair.
* ``svml``     the leverage variant: beta uses the de-correlated
               observations, indicators and the smoother use the joint
               component likelihoods, alpha includes rho; the correction
               step is optional (on by default).
* ``ordinate`` one-block MH for the full parameter vector given h, then the
               indicator/smoother/correction h update; emits the fixed
               Laplace proposal needed by the marginal-likelihood ordinate.

All acceptance probabilities are formed in log space; the only
exponentiation happens against the final uniform draw.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DataError
from .mixture import MixtureGrid, MixtureTable, build_grid, default_table
from .model import PriorSpec, SvmParams, TransformedData, transform
from .state_space import ssm_from_mixture

ALGORITHMS = ("gms", "gmh", "svml", "ordinate")
MODELS = ("sv", "svm", "svl", "svml")

_LOG_2PI = math.log(2.0 * math.pi)


def model_flags(model: str) -> tuple[bool, bool]:
    """(leverage, beta_free) for a model name."""
    if model not in MODELS:
        raise ConfigurationError(f"unknown model {model!r}; choose from {MODELS}")
    return model in ("svl", "svml"), model in ("svm", "svml")


@dataclass
class McmcConfig:
    n_burnin: int = 10_000
    n_draws: int = 50_000
    algorithm: str = "gms"
    model: str = "svm"
    mix_order: int = 2
    offset: float = 1e-7
    seed: int = 0
    flat_proposal_scale: float = 1.0
    store_h_indices: tuple[int, ...] = ()  # 1-based time indices
    store_h_thin: int = 0  # 0 disables full-path storage
    correction: bool = True  # the svml algorithm's optional exact-correction step

    def validate(self) -> None:
        if self.n_burnin < 0 or self.n_draws <= 0:
            raise ConfigurationError("n_burnin must be >= 0 and n_draws positive")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.mix_order < 0:
            raise ConfigurationError("mix_order must be >= 0")
        if not self.offset > 0.0:
            raise ConfigurationError("offset must be positive")
        if not self.flat_proposal_scale > 0.0:
            raise ConfigurationError("flat_proposal_scale must be positive")
        if self.store_h_thin < 0:
            raise ConfigurationError("store_h_thin must be >= 0")
        leverage, _ = model_flags(self.model)
        if self.algorithm in ("gms", "gmh") and leverage:
            raise ConfigurationError(f"algorithm {self.algorithm!r} cannot fit leverage model {self.model!r}")
        if self.algorithm == "svml" and not leverage:
            raise ConfigurationError("the svml algorithm requires a leverage model (svl or svml)")


@dataclass
class ChainOutput:
    param_names: tuple[str, ...]
    draws: np.ndarray
    h_indices: tuple[int, ...]
    h_draws: np.ndarray
    h_path_iters: np.ndarray
    h_paths: np.ndarray
    accept_alpha: float
    accept_correction: float
    seed: int
    elapsed: float
    config: McmcConfig
    final_proposal: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def posterior_mean_params(self) -> SvmParams:
        """SvmParams at the marginal posterior means of the stored draws."""
        means = {name: float(self.draws[:, i].mean()) for i, name in enumerate(self.param_names)}
        leverage, _ = model_flags(self.config.model)
        return SvmParams(
            mu=means["mu"],
            phi=means["phi"],
            sigma2=means["sigma2"],
            beta=means.get("beta", 0.0),
            rho=means["rho"] if leverage else None,
        )


# ---------------------------------------------------------------------------
# parameter transformations
# ---------------------------------------------------------------------------


def to_unconstrained(params: SvmParams, include_beta: bool, include_rho: bool) -> np.ndarray:
    v = [params.mu, 2.0 * math.atanh(params.phi), math.log(params.sigma2)]
    if include_beta:
        v.append(params.beta)
    if include_rho:
        v.append(2.0 * math.atanh(params.rho))
    return np.array(v)


def from_unconstrained(v: np.ndarray, include_beta: bool, include_rho: bool,
                       beta_fixed: float = 0.0) -> SvmParams:
    mu = v[0]
    phi = math.tanh(0.5 * v[1])
    sigma2 = math.exp(v[2])
    k = 3
    beta = beta_fixed
    if include_beta:
        beta = v[k]
        k += 1
    rho = math.tanh(0.5 * v[k]) if include_rho else None
    return SvmParams(mu=mu, phi=phi, sigma2=sigma2, beta=beta, rho=rho)


def _log_half_sech2(x: float) -> float:
    # log((1 - tanh^2(x/2)) / 2) = log 2 - 2*logaddexp(x/2, -x/2)
    ax = abs(0.5 * x)
    return math.log(2.0) - 2.0 * (ax + math.log1p(math.exp(-2.0 * ax)))


def _log_jacobian(v: np.ndarray, include_beta: bool, include_rho: bool) -> float:
    """log |d theta / d vartheta| for the atanh/log transform, computed
    stably through log sech^2."""
    out = _log_half_sech2(float(v[1])) + float(v[2])
    if include_rho:
        out += _log_half_sech2(float(v[-1]))
    return out


# ---------------------------------------------------------------------------
# beta block (conjugate)
# ---------------------------------------------------------------------------


def beta_posterior_moments(params: SvmParams, h: np.ndarray, y: np.ndarray,
                           priors: PriorSpec) -> tuple[float, float]:
    """(b1, B1) of the exact normal conditional for beta.

    The leverage form regresses the de-correlated observations
    ytilde_t = y_t - rho e^{h_t/2} eta_t / sigma on exp(h_t/2) with weights
    (1-rho^2) e^{h_t} for t < n and e^{h_n} at the boundary.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    ehalf = np.exp(0.5 * h)
    if params.leverage:
        rho, sig = params.rho, params.sigma
        eta = h[1:] - params.mu - params.phi * (h[:-1] - params.mu)
        ytil = y.astype(float).copy()
        ytil[:-1] -= rho * ehalf[:-1] * eta / sig
        winv = np.exp(-h)
        winv[:-1] /= 1.0 - rho**2
        xwx = float(np.sum(ehalf**2 * winv))
        xwy = float(np.sum(ehalf * winv * ytil))
    else:
        xwx = float(h.shape[0])
        xwy = float(np.sum(y * np.exp(-0.5 * h)))
    B1 = 1.0 / (xwx + 1.0 / priors.B0)
    b1 = B1 * (xwy + priors.b0 / priors.B0)
    return b1, B1


def draw_beta(params: SvmParams, h: np.ndarray, y: np.ndarray, priors: PriorSpec,
              rng: np.random.Generator) -> float:
    b1, B1 = beta_posterior_moments(params, h, y, priors)
    return b1 + math.sqrt(B1) * rng.standard_normal()


# ---------------------------------------------------------------------------
# indicator block
# ---------------------------------------------------------------------------


def _grid_ctx(grid: MixtureGrid, table: MixtureTable):
    return (
        grid.log_weights,
        grid.means,
        table.v2,
        np.exp(0.5 * grid.means),
        table.a,
        table.b,
    )


def indicator_probabilities(h, params: SvmParams, tdata: TransformedData,
                            grid: MixtureGrid, table: MixtureTable | None = None) -> np.ndarray:
    """Normalized per-t categorical probabilities over the K x (J+1) grid."""
    if table is None:
        table = default_table()
    rho = params.rho if params.leverage else 0.0
    lp = _kernels.indicator_log_probs(
        np.asarray(tdata.ystar, dtype=float), np.asarray(h, dtype=float), tdata.d,
        *_grid_ctx(grid, table),
        params.mu, params.phi, params.sigma2, params.beta, rho, params.leverage,
    )
    mx = lp.max(axis=(1, 2), keepdims=True)
    p = np.exp(lp - mx)
    return p / p.sum(axis=(1, 2), keepdims=True)


def draw_indicators(h, params: SvmParams, tdata: TransformedData, grid: MixtureGrid,
                    rng: np.random.Generator,
                    table: MixtureTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Independent categorical draws of the component pair per time point."""
    if table is None:
        table = default_table()
    rho = params.rho if params.leverage else 0.0
    n = tdata.ystar.shape[0]
    return _kernels.draw_indicator_path(
        np.asarray(tdata.ystar, dtype=float), np.asarray(h, dtype=float), tdata.d,
        *_grid_ctx(grid, table),
        params.mu, params.phi, params.sigma2, params.beta, rho, params.leverage,
        rng.random(n),
    )


# ---------------------------------------------------------------------------
# alpha block: independence MH with a Laplace proposal at the numeric mode
# ---------------------------------------------------------------------------


@dataclass
class _Proposal:
    mean: np.ndarray
    chol: np.ndarray | None  # None marks the symmetric random-walk fallback
    scale: float  # used by the fallback

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.shape[0])
        if self.chol is None:
            return self.mean + math.sqrt(self.scale) * z
        return self.mean + self.chol @ z

    def log_pdf(self, v: np.ndarray) -> float:
        d = self.mean.shape[0]
        if self.chol is None:
            r = v - self.mean
            return -0.5 * (d * (_LOG_2PI + math.log(self.scale)) + float(r @ r) / self.scale)
        w = np.linalg.solve(self.chol, v - self.mean)
        return -0.5 * (d * _LOG_2PI + float(w @ w)) - float(np.log(np.diag(self.chol)).sum())


class _AlphaContext:
    """Static data for one alpha update: indicators, beta, transformed data."""

    def __init__(self, s1, s2, beta, tdata: TransformedData, grid: MixtureGrid,
                 table: MixtureTable, priors: PriorSpec, leverage: bool):
        self.ystar = np.ascontiguousarray(tdata.ystar, dtype=float)
        self.priors = priors
        self.leverage = leverage
        self.beta = beta
        n = self.ystar.shape[0]
        self.n = n
        self.mobs = np.ascontiguousarray(grid.means[s1, s2])
        self.v2obs = np.ascontiguousarray(table.v2[s1])
        if leverage:
            exp_half = np.exp(0.5 * self.mobs)
            self.icpt_base = np.ascontiguousarray(tdata.d * table.a[s1] * exp_half - beta)
            self.load_base = np.ascontiguousarray(
                tdata.d * table.b[s1] * np.sqrt(table.v2[s1]) * exp_half
            )
        self._dummy = np.empty(0)
        # deterministic Newton restart: a function of (s, beta, y*) only, so
        # the fitted proposal cannot inherit chain history
        start = [float(np.mean(self.ystar - self.mobs)), 2.0 * math.atanh(0.95),
                 math.log(0.05)]
        if leverage:
            start.append(0.0)
        self.det_start = np.array(start)

    def log_target(self, v: np.ndarray) -> float:
        """log pi*(vartheta | s, beta, y*): Kalman marginal + prior + Jacobian."""
        mu = float(v[0])
        if not (math.isfinite(v[0]) and math.isfinite(v[1]) and math.isfinite(v[2])):
            return -math.inf
        if abs(v[1]) > 1400.0 or v[2] > 700.0:
            return -math.inf
        phi = math.tanh(0.5 * float(v[1]))
        s2 = math.exp(float(v[2]))
        if not (abs(phi) < 1.0 and s2 > 0.0 and math.isfinite(s2)):
            return -math.inf
        pri = self.priors
        lp = pri.log_pdf_mu(mu) + pri.log_pdf_phi(phi) + pri.log_pdf_sigma2(s2)
        rho = 0.0
        if self.leverage:
            if not math.isfinite(v[3]):
                return -math.inf
            rho = math.tanh(0.5 * float(v[3]))
            if not abs(rho) < 1.0:
                return -math.inf
            lp += pri.log_pdf_rho(rho)
        lp += _log_jacobian(v, False, self.leverage)
        if not math.isfinite(lp):
            return -math.inf
        if self.leverage:
            ll = _kernels.mix_kalman_loglik(
                self.ystar, self.mobs, self.v2obs, self.icpt_base, self.load_base,
                mu, phi, s2, rho, True,
            )
        else:
            ll = _kernels.mix_kalman_loglik(
                self.ystar, self.mobs, self.v2obs, self._dummy, self._dummy,
                mu, phi, s2, 0.0, False,
            )
        if not math.isfinite(ll):
            return -math.inf
        return ll + lp


def _fd_grad_hessian(f, x: np.ndarray, f0: float,
                     rel_step: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Central finite-difference gradient and Hessian in one sweep."""
    d = x.shape[0]
    steps = rel_step * np.maximum(1.0, np.abs(x))
    g = np.empty(d)
    H = np.empty((d, d))
    fp = np.empty(d)
    fm = np.empty(d)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        fp[i] = f(x + ei)
        fm[i] = f(x - ei)
        g[i] = (fp[i] - fm[i]) / (2.0 * steps[i])
        H[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / steps[i] ** 2
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return g, H


_GTOL = 1e-2


def _newton_maximize(log_target, x0: np.ndarray, max_iter: int = 40,
                     gtol: float = _GTOL):
    """Newton ascent with Armijo backtracking and a steepest-ascent rescue.

    Returns (mode, value, Hessian-at-mode, converged); value is -inf when
    the start point itself is unusable.
    """
    x = np.array(x0, dtype=float)
    fx = log_target(x)
    if not np.isfinite(fx):
        return x, -math.inf, None, False
    H_last = None
    converged = False
    for _ in range(max_iter):
        g, H = _fd_grad_hessian(log_target, x, fx)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            break
        H_last = H
        if float(np.max(np.abs(g))) < gtol:
            converged = True
            break
        directions = []
        try:
            cand = np.linalg.solve(H, -g)
            if float(g @ cand) > 0.0:  # keep only ascent directions
                directions.append(cand)
        except np.linalg.LinAlgError:
            pass
        directions.append(g / max(1e-8, float(np.linalg.norm(g))))
        moved = False
        for step_dir in directions:
            step = 1.0
            for _ in range(40):
                xn = x + step * step_dir
                fn = log_target(xn)
                if fn > fx:
                    moved = True
                    break
                step *= 0.5
            if moved:
                break
        if not moved:
            break
        x, fx = xn, fn
    return x, fx, H_last, converged


def fit_laplace_proposal(log_target, x0: np.ndarray, c0: float,
                         fallback_center: np.ndarray | None = None,
                         restart: np.ndarray | None = None) -> _Proposal:
    """Numerically locate the mode and fit N(mode, -H^{-1}).

    ``restart`` is a deterministic function of the step's conditioning
    state; whenever the first search fails to reach the gradient tolerance
    it re-runs from there, so the fitted proposal never depends on the
    chain's history (a warm ``x0`` is only a shortcut to the same mode).
    Falls back to the flat proposal N(mode, c0 I) when the Hessian is not
    negative definite, and to a random walk around the current point when
    no usable mode was found at all.
    """
    mode, fmode, H, ok = _newton_maximize(log_target, x0)
    if not ok and restart is not None and not np.array_equal(restart, x0):
        mode2, fmode2, H2, ok2 = _newton_maximize(log_target, restart)
        if ok2 or fmode2 > fmode:
            mode, fmode, H = mode2, fmode2, H2
    if not np.isfinite(fmode) and fallback_center is not None:
        mode, fmode, H, _ = _newton_maximize(log_target, fallback_center)
    if not (np.all(np.isfinite(mode)) and np.isfinite(fmode)):
        center = fallback_center if fallback_center is not None else x0
        return _Proposal(mean=np.array(center, dtype=float), chol=None, scale=c0)
    if H is not None and np.all(np.isfinite(H)):
        try:
            cov = np.linalg.inv(-H)
            cov = 0.5 * (cov + cov.T)
            chol = np.linalg.cholesky(cov)
            return _Proposal(mean=mode, chol=chol, scale=float("nan"))
        except np.linalg.LinAlgError:
            pass
    return _Proposal(mean=mode, chol=math.sqrt(c0) * np.eye(mode.shape[0]), scale=float("nan"))


def mh_independence_step(log_target, current: np.ndarray, proposal: _Proposal,
                         rng: np.random.Generator,
                         random_walk: bool = False) -> tuple[np.ndarray, bool]:
    """One MH update; the random-walk flag marks the symmetric fallback whose
    proposal densities cancel."""
    cand = proposal.draw(rng)
    lt_cur = log_target(current)
    lt_cand = log_target(cand)
    if random_walk:
        log_r = lt_cand - lt_cur
    else:
        log_r = (lt_cand + proposal.log_pdf(current)) - (lt_cur + proposal.log_pdf(cand))
    if math.log(rng.random()) < log_r:
        return cand, True
    return np.array(current, dtype=float), False


def draw_alpha(params: SvmParams, s1, s2, tdata: TransformedData, grid: MixtureGrid,
               priors: PriorSpec, rng: np.random.Generator,
               table: MixtureTable | None = None, c0: float = 1.0,
               warm_start: np.ndarray | None = None) -> tuple[SvmParams, bool, _Proposal]:
    """MH update of alpha = (mu, phi, sigma2[, rho]) given indicators and beta."""
    if table is None:
        table = default_table()
    leverage = params.leverage
    ctx = _AlphaContext(s1, s2, params.beta, tdata, grid, table, priors, leverage)
    v_cur = to_unconstrained(params, False, leverage)
    x0 = warm_start if warm_start is not None else v_cur
    proposal = fit_laplace_proposal(ctx.log_target, x0, c0, fallback_center=v_cur,
                                    restart=ctx.det_start)
    random_walk = proposal.chol is None
    v_new, accepted = mh_independence_step(ctx.log_target, v_cur, proposal, rng,
                                           random_walk=random_walk)
    new_params = from_unconstrained(v_new, False, leverage, beta_fixed=params.beta)
    return new_params, accepted, proposal


def alpha_log_target(v: np.ndarray, s1, s2, beta: float, tdata: TransformedData,
                     grid: MixtureGrid, priors: PriorSpec, leverage: bool,
                     table: MixtureTable | None = None) -> float:
    """Exposed target evaluator (tests compare MH ratios against it)."""
    if table is None:
        table = default_table()
    ctx = _AlphaContext(s1, s2, beta, tdata, grid, table, priors, leverage)
    return ctx.log_target(np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# h block and the exact-correction step
# ---------------------------------------------------------------------------


def draw_h(params: SvmParams, s1, s2, tdata: TransformedData, grid: MixtureGrid,
           rng: np.random.Generator, table: MixtureTable | None = None) -> np.ndarray:
    """Simulation-smoother draw of the latent path given indicators."""
    if table is None:
        table = default_table()
    spec = ssm_from_mixture(
        params.mu, params.phi, params.sigma2, params.beta,
        params.rho if params.leverage else None,
        s1, s2, table, grid, d=tdata.d,
    )
    z = rng.standard_normal(spec.n)
    h, ok = _kernels.simulation_smoother(
        np.ascontiguousarray(tdata.ystar, dtype=float), *spec._arrays(), z
    )
    if not ok:
        raise FloatingPointError("invalid state-space spec in the h draw")
    return h


def correction_log_ratio(current: tuple[SvmParams, np.ndarray],
                         candidate: tuple[SvmParams, np.ndarray],
                         beta: float, tdata: TransformedData, y: np.ndarray,
                         grid: MixtureGrid, table: MixtureTable | None = None) -> float:
    """Log MH ratio removing the mixture-approximation error.

    numerator:   prod_t f(y_t[, h_{t+1}^cand] | h_t^cand, theta^cand)
                 x sum_ij p_ij g(y*_t[, h^cur] | h_t^cur, ...)
    denominator: the same with current and candidate exchanged.

    The indicator path cancels and is not needed.
    """
    if table is None:
        table = default_table()
    params_cur, h_cur = current
    params_cand, h_cand = candidate
    ystar = np.ascontiguousarray(tdata.ystar, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    h_cur = np.ascontiguousarray(h_cur, dtype=float)
    h_cand = np.ascontiguousarray(h_cand, dtype=float)
    if params_cur.leverage:
        gctx = _grid_ctx(grid, table)
        num = _kernels.obs_loglik_sum(y, h_cand, beta) + _kernels.transition_loglik_sum(
            y, h_cand, params_cand.mu, params_cand.phi, params_cand.sigma2, beta,
            params_cand.rho, True,
        ) + _kernels.mixture_joint_logsum(
            ystar, h_cur, tdata.d, *gctx,
            params_cur.mu, params_cur.phi, params_cur.sigma2, beta, params_cur.rho,
        )
        den = _kernels.obs_loglik_sum(y, h_cur, beta) + _kernels.transition_loglik_sum(
            y, h_cur, params_cur.mu, params_cur.phi, params_cur.sigma2, beta,
            params_cur.rho, True,
        ) + _kernels.mixture_joint_logsum(
            ystar, h_cand, tdata.d, *gctx,
            params_cand.mu, params_cand.phi, params_cand.sigma2, beta, params_cand.rho,
        )
    else:
        num = _kernels.obs_loglik_sum(y, h_cand, beta) + _kernels.mixture_obs_logsum(
            ystar, h_cur, grid.log_weights, grid.means, table.v2
        )
        den = _kernels.obs_loglik_sum(y, h_cur, beta) + _kernels.mixture_obs_logsum(
            ystar, h_cand, grid.log_weights, grid.means, table.v2
        )
    return num - den


def correction_mh(current, candidate, beta, tdata, y, grid,
                  rng: np.random.Generator, table: MixtureTable | None = None) -> bool:
    """Accept/reject the candidate (alpha, h) pair against the exact target."""
    log_r = correction_log_ratio(current, candidate, beta, tdata, y, grid, table)
    return math.log(rng.random()) < log_r


# ---------------------------------------------------------------------------
# ordinate (one-block theta) target
# ---------------------------------------------------------------------------


def mixture_h_step(params: SvmParams, h: np.ndarray, tdata: TransformedData,
                   y: np.ndarray, grid: MixtureGrid, rng: np.random.Generator,
                   table: MixtureTable | None = None,
                   correct: bool = True) -> tuple[np.ndarray, bool]:
    """Indicator draw, smoother proposal, and (optionally) the exact-correction
    accept/reject on the latent path with parameters held fixed."""
    if table is None:
        table = default_table()
    s1, s2 = draw_indicators(h, params, tdata, grid, rng, table)
    h_cand = draw_h(params, s1, s2, tdata, grid, rng, table)
    if not correct:
        return h_cand, True
    if correction_mh((params, h), (params, h_cand), params.beta, tdata, y, grid, rng, table):
        return h_cand, True
    return h, False


def theta_log_target(v: np.ndarray, h: np.ndarray, y: np.ndarray, priors: PriorSpec,
                     beta_free: bool, leverage: bool) -> float:
    """log pi(vartheta | h, y) up to a constant: joint density + prior + Jacobian."""
    if not np.all(np.isfinite(v)):
        return -math.inf
    if abs(v[1]) > 1400.0 or v[2] > 700.0 or (leverage and abs(v[-1]) > 1400.0):
        return -math.inf
    params = from_unconstrained(v, beta_free, leverage)
    if not (abs(params.phi) < 1.0 and params.sigma2 > 0.0 and np.isfinite(params.sigma2)):
        return -math.inf
    if leverage and not abs(params.rho) < 1.0:
        return -math.inf
    lp = priors.log_prior(params, include_beta=beta_free)
    lp += _log_jacobian(v, beta_free, leverage)
    if not np.isfinite(lp):
        return -math.inf
    rho = params.rho if leverage else 0.0
    ll = _kernels.joint_loglik(
        np.ascontiguousarray(y, dtype=float), np.ascontiguousarray(h, dtype=float),
        params.mu, params.phi, params.sigma2, params.beta, rho, leverage,
    )
    if not np.isfinite(ll):
        return -math.inf
    return float(ll) + lp


# ---------------------------------------------------------------------------
# chain runners
# ---------------------------------------------------------------------------


def _initial_state(ystar: np.ndarray, leverage: bool) -> tuple[SvmParams, np.ndarray]:
    mu0 = float(np.mean(ystar)) + 1.2704
    params = SvmParams(mu=mu0, phi=0.95, sigma2=0.05, beta=0.0, rho=0.0 if leverage else None)
    h = np.full(ystar.shape[0], mu0)
    return params, h


def run_chain(y: np.ndarray, priors: PriorSpec | None = None,
              config: McmcConfig | None = None,
              rng: np.random.Generator | None = None) -> ChainOutput:
    """Run the configured algorithm and collect draws.

    Identical (config, seed) pairs give bit-identical output.
    """
    config = config if config is not None else McmcConfig()
    config.validate()
    priors = priors if priors is not None else PriorSpec()
    priors.validate()
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise DataError("y must be a 1-D series of length >= 2")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise DataError(f"non-finite value in y at row {int(bad[0])}")
    for idx in config.store_h_indices:
        if not 1 <= idx <= y.shape[0]:
            raise ConfigurationError(f"store_h_indices entry {idx} outside 1..{y.shape[0]}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    start = time.perf_counter()
    if config.algorithm == "ordinate":
        out = _run_ordinate(y, priors, config, rng)
    else:
        out = _run_mixture_family(y, priors, config, rng)
    out.elapsed = time.perf_counter() - start
    return out


def _storage(config: McmcConfig, n: int, param_names: tuple[str, ...]):
    k = len(config.store_h_indices)
    n_paths = 0 if config.store_h_thin == 0 else (config.n_draws + config.store_h_thin - 1) // config.store_h_thin
    return {
        "draws": np.empty((config.n_draws, len(param_names))),
        "h_draws": np.empty((config.n_draws, k)),
        "h_paths": np.empty((n_paths, n)),
        "h_path_iters": np.empty(n_paths, dtype=np.int64),
    }


def _params_row(params: SvmParams, names: tuple[str, ...]) -> list[float]:
    pool = {"mu": params.mu, "phi": params.phi, "sigma2": params.sigma2,
            "beta": params.beta, "rho": params.rho}
    return [pool[nm] for nm in names]


def _param_names(leverage: bool, beta_free: bool) -> tuple[str, ...]:
    names = ["mu", "phi", "sigma2"]
    if beta_free:
        names.append("beta")
    if leverage:
        names.append("rho")
    return tuple(names)


def _run_mixture_family(y, priors, config, rng) -> ChainOutput:
    leverage, beta_free = model_flags(config.model)
    correct = config.algorithm == "gmh" or (config.algorithm == "svml" and config.correction)
    table = default_table()
    tdata = transform(y, config.offset)
    n = y.shape[0]
    params, h = _initial_state(tdata.ystar, leverage)
    names = _param_names(leverage, beta_free)
    store = _storage(config, n, names)
    h_idx0 = np.array(config.store_h_indices, dtype=np.int64) - 1

    grid = build_grid(params.beta, config.mix_order, table)
    warm = None
    acc_alpha = 0
    acc_corr = 0
    total = config.n_burnin + config.n_draws
    path_row = 0
    for it in range(total):
        if beta_free:
            beta = draw_beta(params, h, y, priors, rng)
            params = params.with_(beta=beta)
            grid = build_grid(beta, config.mix_order, table)
        s1, s2 = draw_indicators(h, params, tdata, grid, rng, table)
        cand_params, a_acc, proposal = draw_alpha(
            params, s1, s2, tdata, grid, priors, rng, table,
            c0=config.flat_proposal_scale, warm_start=warm,
        )
        warm = proposal.mean
        h_cand = draw_h(cand_params, s1, s2, tdata, grid, rng, table)
        if correct:
            if correction_mh((params, h), (cand_params, h_cand), params.beta,
                             tdata, y, grid, rng, table):
                params, h = cand_params, h_cand
                corr_acc = True
            else:
                corr_acc = False
        else:
            params, h = cand_params, h_cand
            corr_acc = True
        if it >= config.n_burnin:
            g = it - config.n_burnin
            store["draws"][g] = _params_row(params, names)
            store["h_draws"][g] = h[h_idx0]
            acc_alpha += a_acc
            acc_corr += corr_acc
            if config.store_h_thin and g % config.store_h_thin == 0:
                store["h_paths"][path_row] = h
                store["h_path_iters"][path_row] = g
                path_row += 1
    return ChainOutput(
        param_names=names,
        draws=store["draws"],
        h_indices=tuple(config.store_h_indices),
        h_draws=store["h_draws"],
        h_path_iters=store["h_path_iters"][:path_row],
        h_paths=store["h_paths"][:path_row],
        accept_alpha=acc_alpha / config.n_draws,
        accept_correction=(acc_corr / config.n_draws) if correct else float("nan"),
        seed=config.seed,
        elapsed=0.0,
        config=config,
        final_proposal=None,
    )


def _theta_restart(h: np.ndarray, y: np.ndarray, beta_free: bool,
                   leverage: bool) -> np.ndarray:
    """Deterministic Newton restart for the one-block update: moment
    estimates computed from the conditioning state (h, y) alone."""
    mu0 = float(h.mean())
    hc = h - mu0
    den = float(hc[:-1] @ hc[:-1])
    phi0 = float(np.clip((hc[1:] @ hc[:-1]) / max(den, 1e-12), -0.95, 0.95))
    resid = hc[1:] - phi0 * hc[:-1]
    s20 = max(float(resid.var()), 1e-4)
    start = [mu0, 2.0 * math.atanh(phi0), math.log(s20)]
    eps = y * np.exp(-0.5 * h)
    beta0 = float(eps.mean())
    if beta_free:
        start.append(beta0)
    if leverage:
        e = eps[:-1] - beta0
        sd = float(e.std()) * float(resid.std())
        rho0 = float(np.clip(float(e @ resid) / max(len(resid) * sd, 1e-12), -0.9, 0.9))
        start.append(2.0 * math.atanh(rho0))
    return np.array(start)


def _run_ordinate(y, priors, config, rng) -> ChainOutput:
    leverage, beta_free = model_flags(config.model)
    table = default_table()
    tdata = transform(y, config.offset)
    n = y.shape[0]
    params, h = _initial_state(tdata.ystar, leverage)
    names = _param_names(leverage, beta_free)
    store = _storage(config, n, names)
    h_idx0 = np.array(config.store_h_indices, dtype=np.int64) - 1

    warm = None
    acc_theta = 0
    acc_corr = 0
    total = config.n_burnin + config.n_draws
    path_row = 0
    proposal = None
    for it in range(total):
        target = lambda v: theta_log_target(v, h, y, priors, beta_free, leverage)
        v_cur = to_unconstrained(params, beta_free, leverage)
        x0 = warm if warm is not None else v_cur
        proposal = fit_laplace_proposal(target, x0, config.flat_proposal_scale,
                                        fallback_center=v_cur,
                                        restart=_theta_restart(h, y, beta_free, leverage))
        warm = proposal.mean
        v_new, t_acc = mh_independence_step(target, v_cur, proposal, rng,
                                            random_walk=proposal.chol is None)
        params = from_unconstrained(v_new, beta_free, leverage)

        grid = build_grid(params.beta, config.mix_order, table)
        h, corr_acc = mixture_h_step(params, h, tdata, y, grid, rng, table)

        if it >= config.n_burnin:
            g = it - config.n_burnin
            store["draws"][g] = _params_row(params, names)
            store["h_draws"][g] = h[h_idx0]
            acc_theta += t_acc
            acc_corr += corr_acc
            if config.store_h_thin and g % config.store_h_thin == 0:
                store["h_paths"][path_row] = h
                store["h_path_iters"][path_row] = g
                path_row += 1
    final_prop = None
    if proposal is not None:
        cov = (proposal.chol @ proposal.chol.T) if proposal.chol is not None else (
            proposal.scale * np.eye(proposal.mean.shape[0])
        )
        final_prop = (proposal.mean, cov)
    return ChainOutput(
        param_names=names,
        draws=store["draws"],
        h_indices=tuple(config.store_h_indices),
        h_draws=store["h_draws"],
        h_path_iters=store["h_path_iters"][:path_row],
        h_paths=store["h_paths"][:path_row],
        accept_alpha=acc_theta / config.n_draws,
        accept_correction=acc_corr / config.n_draws,
        seed=config.seed,
        elapsed=0.0,
        config=config,
        final_proposal=final_prop,
    )
