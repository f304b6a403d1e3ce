"""Benchmark models: Markov copula likelihood and the Poisson GLM,
checked against closed forms and a generic-optimizer oracle.
"""

import numpy as np
import pytest
from scipy import optimize, stats

from magmar import copulas
from magmar.benchmarks import (GlmSpec, fit_poisson_glm, loglik_markov_copula,
                               poisson_log_pmf)
from magmar.copulas import CopulaParams, Family


def test_markov_loglik_is_sum_of_pair_densities():
    rng = np.random.default_rng(0)
    u = rng.uniform(0.05, 0.95, size=40)
    par = CopulaParams(rho=0.4)
    got = loglik_markov_copula(u, Family.GAUSSIAN, par)
    want = sum(
        float(copulas.copula_log_density(Family.GAUSSIAN, par,
                                         np.array([u[t]]),
                                         np.array([u[t - 1]]))[0])
        for t in range(1, len(u)))
    assert got == pytest.approx(want, abs=1e-10)


def test_poisson_log_pmf_matches_scipy():
    for lam in (0.5, 3.0, 20.0):
        for k in (0, 1, 7, 30):
            assert poisson_log_pmf(lam, k) == pytest.approx(
                stats.poisson.logpmf(k, lam), abs=1e-10)


def test_intercept_only_glm_closed_form():
    a = np.array([2, 5, 3, 0, 4, 6, 1, 3, 2, 4])
    res = fit_poisson_glm(a, GlmSpec(("intercept",)))
    # with no lag regressors all observations enter; MLE is log(mean)
    assert res.coef["intercept"] == pytest.approx(np.log(a.mean()), abs=1e-8)
    assert res.converged


def test_glm_matches_generic_optimizer_oracle():
    rng = np.random.default_rng(4)
    a = rng.poisson(4.0, size=60)
    spec = GlmSpec(("intercept", "lag_log"))
    res = fit_poisson_glm(a, spec)

    y = a[1:].astype(float)
    x = np.column_stack([np.ones(len(y)), np.log1p(a[:-1])])

    def negll(beta):
        lam = np.exp(x @ beta)
        return -np.sum(y * np.log(lam) - lam
                       - stats.poisson.logpmf(y, y) * 0
                       - np.array([np.sum(np.log(np.arange(1, int(k) + 1)))
                                   for k in y]))

    oracle = optimize.minimize(negll, np.zeros(2), method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-10})
    assert res.coef["intercept"] == pytest.approx(oracle.x[0], abs=1e-5)
    assert res.coef["lag_log"] == pytest.approx(oracle.x[1], abs=1e-5)
    assert res.loglik == pytest.approx(-oracle.fun, abs=1e-6)


def test_glm_climate_regressors_need_climate():
    a = np.arange(30) % 5 + 1
    with pytest.raises(ValueError):
        fit_poisson_glm(a, GlmSpec(("intercept", "climate_lag1")))


def test_glm_with_climate_runs():
    rng = np.random.default_rng(9)
    c = rng.normal(size=40)
    lam = np.exp(1.0 + 0.3 * np.concatenate(([0.0], c[:-1])))
    a = rng.poisson(lam)
    res = fit_poisson_glm(a, GlmSpec(("intercept", "climate_lag1")),
                          climate=c)
    assert res.converged
    assert res.coef["climate_lag1"] == pytest.approx(0.3, abs=0.25)


def test_glm_predictive_log_pmf():
    a = np.array([3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8])
    res = fit_poisson_glm(a, GlmSpec(("intercept", "lag_log")))
    lam = np.exp(res.coef["intercept"]
                 + res.coef["lag_log"] * np.log1p(5))
    got = res.predictive_log_pmf(4, a_prev=5)
    assert got == pytest.approx(stats.poisson.logpmf(4, lam), abs=1e-10)


def test_glm_requires_enough_observations():
    with pytest.raises(ValueError):
        fit_poisson_glm(np.array([1, 2, 3]), GlmSpec(("intercept", "lag_log")))
