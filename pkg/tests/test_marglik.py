import math

import numpy as np
import pytest
from scipy import stats

from svmix.errors import ConfigurationError
from svmix.marglik import CjConfig, MarglikResult, chib_marglik, cj_log_posterior_ordinate
from svmix.model import PriorSpec, SvmParams, simulate
from svmix.particle import PfConfig
from svmix.samplers import McmcConfig, run_chain


def _toy_cj(y, seed, n_draws=20_000, q_mean=0.3, q_sd=1.5):
    """Normal-normal conjugate toy driven through the ordinate harness.

    y ~ N(theta, 1), theta ~ N(0, 1); evidence is N(y; 0, 2) in closed form.
    """
    rng = np.random.default_rng(seed)
    log_kernel = lambda th: -0.5 * (y - th) ** 2 - 0.5 * th**2
    logq = lambda th: stats.norm.logpdf(th, q_mean, q_sd)
    th = 0.0
    draws = np.empty(n_draws)
    for g in range(n_draws):
        cand = q_mean + q_sd * rng.standard_normal()
        if math.log(rng.random()) < (log_kernel(cand) + logq(th)) - (log_kernel(th) + logq(cand)):
            th = cand
        draws[g] = th
    point = float(draws.mean())
    prop = q_mean + q_sd * rng.standard_normal(n_draws)
    log_ord, se = cj_log_posterior_ordinate(
        num_logt_at_draw=log_kernel(draws),
        num_logt_at_point=np.full(n_draws, log_kernel(point)),
        num_logq_at_draw=logq(draws),
        den_logt_at_point=np.full(n_draws, log_kernel(point)),
        den_logt_at_draw=log_kernel(prop),
        den_logq_at_draw=logq(prop),
        logq_at_point=float(logq(point)),
    )
    log_evidence = (stats.norm.logpdf(y, point, 1.0) + stats.norm.logpdf(point, 0.0, 1.0)
                    - log_ord)
    return log_evidence, se, point, log_ord


class TestCjHarness:
    def test_conjugate_toy_recovers_evidence(self):
        y = 0.8
        log_m, se, point, _ = _toy_cj(y, seed=123)
        exact = stats.norm.logpdf(y, 0.0, math.sqrt(2.0))
        assert abs(log_m - exact) < 3.0 * se

    def test_ordinate_matches_closed_form_density(self):
        y = -1.1
        _, _, point, log_ord = _toy_cj(y, seed=7)
        exact_ord = stats.norm.logpdf(point, y / 2.0, math.sqrt(0.5))
        assert log_ord == pytest.approx(exact_ord, abs=0.02)

    def test_point_estimate_invariant_to_batch_count(self):
        y = 0.3
        rng = np.random.default_rng(5)
        log_kernel = lambda th: -0.5 * (y - th) ** 2 - 0.5 * th**2
        logq = lambda th: stats.norm.logpdf(th, 0.0, 1.2)
        draws = rng.normal(y / 2, math.sqrt(0.5), size=4000)
        prop = rng.normal(0.0, 1.2, size=4000)
        args = (
            log_kernel(draws), np.full(4000, log_kernel(0.2)), logq(draws),
            np.full(4000, log_kernel(0.2)), log_kernel(prop), logq(prop),
            float(logq(0.2)),
        )
        a, _ = cj_log_posterior_ordinate(*args, n_batches=10)
        b, _ = cj_log_posterior_ordinate(*args, n_batches=8)
        assert a == pytest.approx(b, abs=1e-12)

    def test_too_few_draws_for_batches(self):
        with pytest.raises(ConfigurationError):
            cj_log_posterior_ordinate(
                np.zeros(5), np.zeros(5), np.zeros(5),
                np.zeros(5), np.zeros(5), np.zeros(5), 0.0, n_batches=10,
            )


@pytest.fixture(scope="module")
def svm_chain_and_data():
    params = SvmParams(mu=-0.3, phi=0.9, sigma2=0.16, beta=0.6)
    y, _ = simulate(params, 120, np.random.default_rng(42))
    priors = PriorSpec()
    cfg = McmcConfig(n_burnin=400, n_draws=2400, algorithm="ordinate", model="svm",
                     seed=17, store_h_thin=3)
    chain = run_chain(y, priors, cfg)
    return y, priors, chain


class TestChibMarglik:
    def test_identity_recombines_exactly(self, svm_chain_and_data):
        y, priors, chain = svm_chain_and_data
        res = chib_marglik(
            y, priors, "svm", chain,
            PfConfig(n_particles=5_000, seed=3),
            CjConfig(n_reduced_burnin=100, n_reduced=800, pf_reps=4),
            np.random.default_rng(11),
        )
        assert res.identity_gap() == 0.0
        assert math.isfinite(res.log_marglik)
        assert res.standard_error == pytest.approx(
            math.hypot(res.se_pf, res.se_ordinate), rel=1e-12)

    def test_requires_ordinate_chain(self, svm_chain_and_data):
        y, priors, chain = svm_chain_and_data
        bad = run_chain(y, priors, McmcConfig(n_burnin=50, n_draws=150, algorithm="gms",
                                              model="svm", seed=1))
        with pytest.raises(ConfigurationError):
            chib_marglik(y, priors, "svm", bad)

    def test_requires_stored_paths(self, svm_chain_and_data):
        y, priors, _ = svm_chain_and_data
        no_paths = run_chain(y, priors, McmcConfig(n_burnin=50, n_draws=150,
                                                   algorithm="ordinate", model="svm", seed=1))
        with pytest.raises(ConfigurationError):
            chib_marglik(y, priors, "svm", no_paths)

    def test_model_mismatch_rejected(self, svm_chain_and_data):
        y, priors, chain = svm_chain_and_data
        with pytest.raises(ConfigurationError):
            chib_marglik(y, priors, "sv", chain)
