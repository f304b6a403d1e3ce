"""Simulation engine: deterministic PRNG streams, uniform stationary
margins, a naive-recursion oracle, and the stationary-CDF estimator.
"""

import numpy as np
import pytest
from scipy import stats

from magmar import copulas, rng
from magmar.copulas import CopulaParams, Family
from magmar.process import (ClimateLink, ModelKind, ModelSpec, PiecewiseCdf,
                            apply_psi, make_ar1_climate, simulate,
                            stationary_marginal_cdf)


def test_rng_reproducible_and_in_unit_interval():
    a = rng.Rng(123).uniforms(5000)
    b = rng.Rng(123).uniforms(5000)
    assert np.array_equal(a, b)
    assert a.min() > 0.0 and a.max() < 1.0
    assert stats.kstest(a, "uniform").pvalue > 0.01


def test_rng_seed_derivation_gives_distinct_streams():
    s1 = rng.derive_seed(7, 0)
    s2 = rng.derive_seed(7, 1)
    assert s1 != s2
    a = rng.Rng(s1).uniforms(100)
    b = rng.Rng(s2).uniforms(100)
    assert not np.allclose(a, b)


def _mag1(family, **kw):
    return ModelSpec(kind=ModelKind.MAG1, mag_family=family,
                     mag_params=CopulaParams(**kw))


def test_simulate_reproducible_and_shapes():
    spec = _mag1(Family.GAUSSIAN, rho=0.4)
    p1 = simulate(spec, 200, seed=5)
    p2 = simulate(spec, 200, seed=5)
    assert np.array_equal(p1.u, p2.u)
    assert len(p1.u) == 200 and len(p1.w) == 200
    assert not np.array_equal(p1.u, simulate(spec, 200, seed=6).u)


def test_gaussian_mag1_fast_path_matches_naive_recursion():
    spec = _mag1(Family.GAUSSIAN, rho=0.6)
    path = simulate(spec, 50, burn_in=10, seed=3)
    # naive oracle: replay the recursion with scalar h_inv calls
    r = rng.Rng(3)
    total = 60
    w = r.uniforms(total + 1)
    u = np.empty(total)
    par = CopulaParams(rho=0.6)
    for t in range(total):
        u[t] = copulas.h_inv(Family.GAUSSIAN, par,
                             np.array([w[t + 1]]), np.array([w[t]]))[0]
    assert np.allclose(path.u, u[10:60], atol=1e-10)


@pytest.mark.parametrize("spec", [
    _mag1(Family.GUMBEL, alpha=2.0),
    _mag1(Family.STUDENT_T, rho=-0.4, nu=4.0),
    ModelSpec(kind=ModelKind.MARKOV, ar_family=Family.STUDENT_T,
              ar_params=CopulaParams(rho=0.5, nu=5.0)),
    ModelSpec(kind=ModelKind.MARKOV, ar_family=Family.GUMBEL,
              ar_params=CopulaParams(alpha=1.8)),
])
def test_stationary_margin_is_uniform(spec):
    # thin the Markov chains so the iid assumption behind KS is defensible
    path = simulate(spec, 20000, seed=21)
    thin = path.u[::10] if spec.kind is ModelKind.MARKOV else path.u[:4000]
    assert stats.kstest(thin, "uniform").pvalue > 0.01


def test_climate_link_parameter_path():
    link = ClimateLink(link="tanh", beta0=0.1, beta1=0.8,
                       target="mag-parameter")
    c = np.array([-1.0, 0.0, 2.0])
    vals = link.param_values(c)
    assert np.allclose(vals, np.clip(np.tanh(0.1 + 0.8 * c),
                                     -copulas.RHO_MAX, copulas.RHO_MAX))
    gl = ClimateLink(link="one-plus-exp", beta0=0.0, beta1=0.5,
                     target="mag-parameter")
    assert np.all(gl.param_values(c) > 1.0)


def test_climate_link_simulation_runs_and_stays_uniformish():
    link = ClimateLink(link="tanh", beta0=0.0, beta1=0.6,
                       target="mag-parameter")
    spec = ModelSpec(kind=ModelKind.MAG1, mag_family=Family.GAUSSIAN,
                     mag_params=CopulaParams(), climate_link=link)
    climate = make_ar1_climate(2500 + 100, phi=0.5, seed=2)
    path = simulate(spec, 2500, burn_in=100, seed=4, climate=climate)
    assert len(path.u) == 2500
    assert stats.kstest(path.u, "uniform").pvalue > 0.001


def test_piecewise_cdf_monotone_and_interpolating():
    knots = np.array([0.0, 0.2, 0.7, 1.0])
    vals = np.array([0.0, 0.1, 0.8, 1.0])
    cdf = PiecewiseCdf(knots, vals)
    x = np.linspace(0, 1, 101)
    y = cdf(x)
    assert np.all(np.diff(y) >= 0)
    assert cdf(np.array([0.2]))[0] == pytest.approx(0.1)
    ident = PiecewiseCdf.identity()
    assert np.allclose(ident(x), x)


def test_stationary_marginal_cdf_near_identity_for_uniform_process():
    spec = _mag1(Family.GAUSSIAN, rho=0.5)
    psi = stationary_marginal_cdf(spec, m=20000, seed=8)
    x = np.linspace(0.02, 0.98, 49)
    assert np.max(np.abs(psi(x) - x)) < 0.02
    u = simulate(spec, 500, seed=9).u
    v = apply_psi(psi, u)
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(kind=ModelKind.MAG1, mag_family=Family.GAUSSIAN,
                  mag_params=CopulaParams(rho=1.5))
    with pytest.raises(ValueError):
        ModelKind.parse("arma")
