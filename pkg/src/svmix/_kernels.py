"""Compiled scalar-loop kernels.

Everything here is numba-compiled and operates on plain float64 arrays;
the public modules build the coefficient arrays and own validation,
errors, and RNG seeding.  Kernels that need randomness take either a
pre-drawn array of standard normals/uniforms or a numpy Generator, so a
fixed seed gives bit-stable output (all reductions are sequential).

State-variance recursions clamp at VAR_FLOOR to absorb rounding over
long series.
"""

import math

import numpy as np
from numba import njit

VAR_FLOOR = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# linear Gaussian state space: filter, simulation smoother, moment smoother
#
# Observation: y*_t = mobs_t + h_t + v_t z1_t
# State:       h_{t+1} = icpt_t + phi h_t + load_t z1_t + svar_t^{1/2} z2_t
# with z1, z2 iid N(0,1); the shared z1 makes the noises correlated when
# load_t != 0.  The filter conditions jointly on y*_t at each step; the
# backward passes use the equivalent conditional transition
#   h_{t+1} | h_t, y*_t ~ N(A_t + B_t h_t, svar_t),
#   A_t = icpt_t + (load_t/v_t)(y*_t - mobs_t),  B_t = phi - load_t/v_t.
# ---------------------------------------------------------------------------


@njit(cache=True)
def kalman_filter(ystar, mobs, v2obs, icpt, phi, load, svar, a1, p1):
    """One pass of the joint-conditioning Kalman filter.

    Returns (loglik, filtered_means, filtered_vars, ok).  ok is False when a
    prediction variance is non-positive or non-finite.
    """
    n = ystar.shape[0]
    am = np.empty(n)
    pm = np.empty(n)
    a = a1
    p = p1
    ll = 0.0
    for t in range(n):
        f = p + v2obs[t]
        if not (f > 0.0 and np.isfinite(f)):
            return np.nan, am, pm, False
        e = ystar[t] - mobs[t] - a
        ll += -0.5 * (_LOG_2PI + math.log(f) + e * e / f)
        am[t] = a + p * e / f
        q = p - p * p / f
        pm[t] = q if q > VAR_FLOOR else VAR_FLOOR
        if t < n - 1:
            k = (phi * p + load[t] * math.sqrt(v2obs[t])) / f
            a = icpt[t] + phi * a + k * e
            p = phi * phi * p + load[t] * load[t] + svar[t] - k * k * f
            if p < VAR_FLOOR:
                p = VAR_FLOOR
    return ll, am, pm, True


@njit(cache=True)
def simulation_smoother(ystar, mobs, v2obs, icpt, phi, load, svar, a1, p1, z):
    """One draw of the full state path from its Gaussian smoothing law.

    Forward filter then backward sampling through the conditional
    transition; ``z`` holds n pre-drawn standard normals.
    """
    n = ystar.shape[0]
    _, am, pm, ok = kalman_filter(ystar, mobs, v2obs, icpt, phi, load, svar, a1, p1)
    h = np.empty(n)
    if not ok:
        return h, False
    h[n - 1] = am[n - 1] + math.sqrt(pm[n - 1]) * z[n - 1]
    for t in range(n - 2, -1, -1):
        v = math.sqrt(v2obs[t])
        bt = phi - load[t] / v
        at = icpt[t] + (load[t] / v) * (ystar[t] - mobs[t])
        pred = bt * bt * pm[t] + svar[t]
        if pred > 1e-300:
            gain = pm[t] * bt / pred
            m = am[t] + gain * (h[t + 1] - at - bt * am[t])
            var = pm[t] - gain * gain * pred
        else:
            m = am[t]
            var = pm[t]
        if var < 0.0:
            var = 0.0
        h[t] = m + math.sqrt(var) * z[t]
    return h, True


@njit(cache=True)
def smoother_moments(ystar, mobs, v2obs, icpt, phi, load, svar, a1, p1):
    """Marginal smoothed means and variances per time point."""
    n = ystar.shape[0]
    _, am, pm, ok = kalman_filter(ystar, mobs, v2obs, icpt, phi, load, svar, a1, p1)
    ms = np.empty(n)
    vs = np.empty(n)
    if not ok:
        return ms, vs, False
    ms[n - 1] = am[n - 1]
    vs[n - 1] = pm[n - 1]
    for t in range(n - 2, -1, -1):
        v = math.sqrt(v2obs[t])
        bt = phi - load[t] / v
        at = icpt[t] + (load[t] / v) * (ystar[t] - mobs[t])
        pred = bt * bt * pm[t] + svar[t]
        if pred > 1e-300:
            gain = pm[t] * bt / pred
            ms[t] = am[t] + gain * (ms[t + 1] - at - bt * am[t])
            vs[t] = pm[t] + gain * gain * (vs[t + 1] - pred)
        else:
            ms[t] = am[t]
            vs[t] = pm[t]
        if vs[t] < 0.0:
            vs[t] = 0.0
    return ms, vs, True


@njit(cache=True)
def mix_kalman_loglik(ystar, mobs, v2obs, icpt_base, load_base, mu, phi, s2, rho, leverage):
    """Kalman marginal likelihood with coefficients built in-loop.

    icpt_base_t = d_t a_{s_t} exp(m_t/2) - beta and load_base_t =
    d_t b_{s_t} v_{s_t} exp(m_t/2) are the alpha-independent leverage
    pieces; both are ignored when leverage is False.  Returns NaN on an
    invalid prediction variance.
    """
    n = ystar.shape[0]
    sig = math.sqrt(s2)
    a = mu
    p = s2 / (1.0 - phi * phi)
    svar = s2 * (1.0 - rho * rho) if leverage else s2
    c0 = mu * (1.0 - phi)
    ll = 0.0
    for t in range(n):
        f = p + v2obs[t]
        if not (f > 0.0 and np.isfinite(f)):
            return np.nan
        e = ystar[t] - mobs[t] - a
        ll += -0.5 * (_LOG_2PI + math.log(f) + e * e / f)
        if t < n - 1:
            if leverage:
                icpt = c0 + rho * sig * icpt_base[t]
                load = rho * sig * load_base[t]
            else:
                icpt = c0
                load = 0.0
            k = (phi * p + load * math.sqrt(v2obs[t])) / f
            a = icpt + phi * a + k * e
            p = phi * phi * p + load * load + svar - k * k * f
            if p < VAR_FLOOR:
                p = VAR_FLOOR
    return ll


# ---------------------------------------------------------------------------
# mixture-indicator draws
# ---------------------------------------------------------------------------


@njit(cache=True)
def indicator_log_probs(ystar, h, d, log_w, means, v2, exp_half_means, lin_a, lin_b,
                        mu, phi, sigma2, beta, rho, leverage):
    """Unnormalized per-t log posterior over the K x (J+1) components.

    Without leverage the component likelihood is N(y*_t; m_ij + h_t, v_i^2);
    with leverage it is multiplied by N(h_{t+1}; hbar_ij_t, sigma2(1-rho^2))
    for t < n.
    """
    n = ystar.shape[0]
    K = means.shape[0]
    J1 = means.shape[1]
    out = np.empty((n, K, J1))
    sig = math.sqrt(sigma2)
    tv = sigma2 * (1.0 - rho * rho)
    for t in range(n):
        for i in range(K):
            lc = -0.5 * (_LOG_2PI + math.log(v2[i]))
            for j in range(J1):
                e = ystar[t] - means[i, j] - h[t]
                lp = log_w[i, j] + lc - 0.5 * e * e / v2[i]
                if leverage and t < n - 1:
                    eps_star = ystar[t] - h[t]
                    hbar = (
                        mu * (1.0 - phi)
                        + phi * h[t]
                        + rho * sig * (
                            d[t] * exp_half_means[i, j]
                            * (lin_a[i] + lin_b[i] * (eps_star - means[i, j]))
                            - beta
                        )
                    )
                    r = h[t + 1] - hbar
                    lp += -0.5 * (_LOG_2PI + math.log(tv) + r * r / tv)
                out[t, i, j] = lp
    return out


@njit(cache=True)
def draw_indicator_path(ystar, h, d, log_w, means, v2, exp_half_means, lin_a, lin_b,
                        mu, phi, sigma2, beta, rho, leverage, uniforms):
    """Sample the component index pair per t from its categorical posterior.

    Log-space normalization per t, so simultaneous underflow of all
    component likelihoods cannot produce an invalid draw.
    """
    n = ystar.shape[0]
    K = means.shape[0]
    J1 = means.shape[1]
    s1 = np.empty(n, dtype=np.int64)
    s2 = np.empty(n, dtype=np.int64)
    logp = np.empty(K * J1)
    sig = math.sqrt(sigma2)
    tv = sigma2 * (1.0 - rho * rho)
    for t in range(n):
        mx = -np.inf
        idx = 0
        for i in range(K):
            lc = -0.5 * (_LOG_2PI + math.log(v2[i]))
            for j in range(J1):
                e = ystar[t] - means[i, j] - h[t]
                lp = log_w[i, j] + lc - 0.5 * e * e / v2[i]
                if leverage and t < n - 1:
                    eps_star = ystar[t] - h[t]
                    hbar = (
                        mu * (1.0 - phi)
                        + phi * h[t]
                        + rho * sig * (
                            d[t] * exp_half_means[i, j]
                            * (lin_a[i] + lin_b[i] * (eps_star - means[i, j]))
                            - beta
                        )
                    )
                    r = h[t + 1] - hbar
                    lp += -0.5 * (_LOG_2PI + math.log(tv) + r * r / tv)
                logp[idx] = lp
                if lp > mx:
                    mx = lp
                idx += 1
        total = 0.0
        for c in range(K * J1):
            logp[c] = math.exp(logp[c] - mx)
            total += logp[c]
        target = uniforms[t] * total
        acc = 0.0
        pick = K * J1 - 1
        for c in range(K * J1):
            acc += logp[c]
            if acc >= target:
                pick = c
                break
        s1[t] = pick // J1
        s2[t] = pick % J1
    return s1, s2


# ---------------------------------------------------------------------------
# exact and mixture log densities used by the correction step and the
# one-block parameter update
# ---------------------------------------------------------------------------


@njit(cache=True)
def obs_loglik_sum(y, h, beta):
    """sum_t log f(y_t | h_t): N(beta e^{h/2}, e^{h})."""
    n = y.shape[0]
    s = 0.0
    for t in range(n):
        ehalf = math.exp(0.5 * h[t])
        r = y[t] - beta * ehalf
        s += -0.5 * (_LOG_2PI + h[t] + r * r * math.exp(-h[t]))
    return s


@njit(cache=True)
def transition_loglik_sum(y, h, mu, phi, sigma2, beta, rho, leverage):
    """sum_{t<n} log f(h_{t+1} | h_t, y_t); leverage shifts the mean by
    rho sigma e^{-h_t/2}(y_t - beta e^{h_t/2}) and scales the variance by
    (1 - rho^2)."""
    n = h.shape[0]
    sig = math.sqrt(sigma2)
    tv = sigma2 * (1.0 - rho * rho) if leverage else sigma2
    s = 0.0
    for t in range(n - 1):
        m = mu + phi * (h[t] - mu)
        if leverage:
            m += rho * sig * math.exp(-0.5 * h[t]) * (y[t] - beta * math.exp(0.5 * h[t]))
        r = h[t + 1] - m
        s += -0.5 * (_LOG_2PI + math.log(tv) + r * r / tv)
    return s


@njit(cache=True)
def mixture_obs_logsum(ystar, h, log_w, means, v2):
    """sum_t log sum_ij p_ij N(y*_t; m_ij + h_t, v_i^2)."""
    n = ystar.shape[0]
    K = means.shape[0]
    J1 = means.shape[1]
    buf = np.empty(K * J1)
    lconst = np.empty(K)
    for i in range(K):
        lconst[i] = -0.5 * (_LOG_2PI + math.log(v2[i]))
    total = 0.0
    for t in range(n):
        mx = -np.inf
        c = 0
        for i in range(K):
            for j in range(J1):
                e = ystar[t] - means[i, j] - h[t]
                lp = log_w[i, j] + lconst[i] - 0.5 * e * e / v2[i]
                buf[c] = lp
                if lp > mx:
                    mx = lp
                c += 1
        acc = 0.0
        for c in range(K * J1):
            acc += math.exp(buf[c] - mx)
        total += mx + math.log(acc)
    return total


@njit(cache=True)
def mixture_joint_logsum(ystar, h, d, log_w, means, v2, exp_half_means, lin_a, lin_b,
                         mu, phi, sigma2, beta, rho):
    """Leverage analogue of mixture_obs_logsum with the joint component
    likelihood g(y*_t, h_{t+1} | h_t, ...) for t < n."""
    lp_all = indicator_log_probs(ystar, h, d, log_w, means, v2, exp_half_means,
                                 lin_a, lin_b, mu, phi, sigma2, beta, rho, True)
    n = ystar.shape[0]
    total = 0.0
    for t in range(n):
        mx = -np.inf
        for i in range(lp_all.shape[1]):
            for j in range(lp_all.shape[2]):
                if lp_all[t, i, j] > mx:
                    mx = lp_all[t, i, j]
        acc = 0.0
        for i in range(lp_all.shape[1]):
            for j in range(lp_all.shape[2]):
                acc += math.exp(lp_all[t, i, j] - mx)
        total += mx + math.log(acc)
    return total


@njit(cache=True)
def joint_loglik(y, h, mu, phi, sigma2, beta, rho, leverage):
    """log f(y, h | theta): stationary h_1 term, observations, transitions."""
    p1 = sigma2 / (1.0 - phi * phi)
    r1 = h[0] - mu
    s = -0.5 * (_LOG_2PI + math.log(p1) + r1 * r1 / p1)
    s += obs_loglik_sum(y, h, beta)
    s += transition_loglik_sum(y, h, mu, phi, sigma2, beta, rho, leverage)
    return s


# ---------------------------------------------------------------------------
# auxiliary particle filter
# ---------------------------------------------------------------------------


@njit(cache=True)
def _log_obs(yv, hv, beta):
    ehalf = math.exp(0.5 * hv)
    r = yv - beta * ehalf
    return -0.5 * (_LOG_2PI + hv + r * r * math.exp(-hv))


@njit(cache=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@njit(cache=True)
def _systematic_indices(w, u0):
    """Systematic resampling: one uniform, stratified positions."""
    n = w.shape[0]
    idx = np.empty(n, dtype=np.int64)
    cum = 0.0
    j = 0
    for i in range(n):
        target = (i + u0) / n
        while cum + w[j] < target and j < n - 1:
            cum += w[j]
            j += 1
        idx[i] = j
    return idx


@njit(cache=True)
def _multinomial_indices(w, us):
    n = w.shape[0]
    cdf = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc += w[i]
        cdf[i] = acc
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        idx[i] = np.searchsorted(cdf, us[i] * acc)
        if idx[i] >= n:
            idx[i] = n - 1
    return idx


@njit(cache=True)
def apf_filter(y, mu, phi, sigma2, beta, rho, n_particles, systematic, gen):
    """Auxiliary particle filter estimate of the likelihood.

    Returns (logw_bar[t], dist_fn[t], err_t); err_t >= 0 flags the first
    time point at which every particle weight underflowed.
    """
    n = y.shape[0]
    I = n_particles
    sig = math.sqrt(sigma2)
    sd_state = sig * math.sqrt(1.0 - rho * rho)
    logwbar = np.empty(n)
    distfn = np.empty(n)

    h = np.empty(I)
    logpi = np.empty(I)
    mu_next = np.empty(I)
    logq = np.empty(I)
    qn = np.empty(I)
    hn = np.empty(I)
    logw = np.empty(I)
    omega = np.empty(I)

    sd1 = math.sqrt(sigma2 / (1.0 - phi * phi))
    for i in range(I):
        h[i] = mu + sd1 * gen.standard_normal()
        logw[i] = _log_obs(y[0], h[i], beta)
    mx = -np.inf
    for i in range(I):
        if logw[i] > mx:
            mx = logw[i]
    if not np.isfinite(mx):
        return logwbar, distfn, 0
    acc = 0.0
    facc = 0.0
    for i in range(I):
        wi = math.exp(logw[i] - mx)
        acc += wi
        facc += _norm_cdf((y[0] - beta * math.exp(0.5 * h[i])) * math.exp(-0.5 * h[i]))
    logwbar[0] = mx + math.log(acc / I)
    distfn[0] = facc / I
    lse = mx + math.log(acc)
    for i in range(I):
        logpi[i] = logw[i] - lse

    for t in range(n - 1):
        # first-stage (look-ahead) weights
        mxq = -np.inf
        for i in range(I):
            m = mu + phi * (h[i] - mu)
            if rho != 0.0:
                m += rho * sig * math.exp(-0.5 * h[i]) * (y[t] - beta * math.exp(0.5 * h[i]))
            mu_next[i] = m
            logq[i] = _log_obs(y[t + 1], m, beta) + logpi[i]
            if logq[i] > mxq:
                mxq = logq[i]
        if not np.isfinite(mxq):
            return logwbar, distfn, t + 1
        sq = 0.0
        for i in range(I):
            qn[i] = math.exp(logq[i] - mxq)
            sq += qn[i]
        for i in range(I):
            qn[i] /= sq
        lq_norm = mxq + math.log(sq)

        if systematic:
            idx = _systematic_indices(qn, gen.random())
        else:
            us = np.empty(I)
            for i in range(I):
                us[i] = gen.random()
            idx = _multinomial_indices(qn, us)

        # propagate and second-stage weights
        mxw = -np.inf
        for i in range(I):
            k = idx[i]
            hn[i] = mu_next[k] + sd_state * gen.standard_normal()
            lqk = logq[k] - lq_norm
            logw[i] = _log_obs(y[t + 1], hn[i], beta) + logpi[k] - lqk
            omega[i] = math.exp(logpi[k] - lqk)
            if logw[i] > mxw:
                mxw = logw[i]
        if not np.isfinite(mxw):
            return logwbar, distfn, t + 1
        acc = 0.0
        fnum = 0.0
        fden = 0.0
        for i in range(I):
            acc += math.exp(logw[i] - mxw)
            fi = _norm_cdf((y[t + 1] - beta * math.exp(0.5 * hn[i])) * math.exp(-0.5 * hn[i]))
            fnum += fi * omega[i]
            fden += omega[i]
        logwbar[t + 1] = mxw + math.log(acc / I)
        distfn[t + 1] = fnum / fden
        lse = mxw + math.log(acc)
        for i in range(I):
            logpi[i] = logw[i] - lse
            h[i] = hn[i]

    return logwbar, distfn, -1


# ---------------------------------------------------------------------------
# model simulation
# ---------------------------------------------------------------------------


@njit(cache=True)
def simulate_path(mu, phi, sigma2, beta, rho, n, z_eps, z_state, z_init):
    """Generate (y, h) from the model given pre-drawn standard normals.

    eta_t = rho sigma eps_t + sigma sqrt(1-rho^2) z_state_t reproduces the
    joint error covariance.
    """
    sig = math.sqrt(sigma2)
    h = np.empty(n)
    y = np.empty(n)
    h[0] = mu + math.sqrt(sigma2 / (1.0 - phi * phi)) * z_init
    for t in range(n):
        y[t] = (beta + z_eps[t]) * math.exp(0.5 * h[t])
        if t < n - 1:
            eta = rho * sig * z_eps[t] + sig * math.sqrt(1.0 - rho * rho) * z_state[t]
            h[t + 1] = mu + phi * (h[t] - mu) + eta
    return y, h
