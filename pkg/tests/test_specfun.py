"""Special-function wrappers checked against independent oracles
(math.erf, numerical quadrature) rather than the backing library.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from magmar import specfun


def test_std_normal_cdf_against_erf():
    for x in (-3.0, -1.0, -0.2, 0.0, 0.7, 2.5):
        oracle = 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
        assert specfun.std_normal_cdf(x) == pytest.approx(oracle, abs=1e-14)


def test_std_normal_pdf_is_cdf_derivative():
    for x in (-2.0, -0.5, 0.0, 1.3):
        eps = 1e-6
        deriv = (specfun.std_normal_cdf(x + eps)
                 - specfun.std_normal_cdf(x - eps)) / (2 * eps)
        assert specfun.std_normal_pdf(x) == pytest.approx(deriv, abs=1e-8)


def test_std_normal_quantile_roundtrip():
    for p in (1e-8, 0.01, 0.3, 0.5, 0.9, 1 - 1e-8):
        x = specfun.std_normal_quantile(p)
        assert specfun.std_normal_cdf(x) == pytest.approx(p, abs=1e-12)


def test_std_normal_quantile_domain():
    for p in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            specfun.std_normal_quantile(p)


def _t_pdf(x, nu):
    c = math.exp(specfun.log_gamma((nu + 1) / 2) - specfun.log_gamma(nu / 2))
    return c / math.sqrt(nu * math.pi) * (1 + x * x / nu) ** (-(nu + 1) / 2)


@pytest.mark.parametrize("nu", [2.5, 4.0, 10.0])
def test_student_t_cdf_against_quadrature(nu):
    for x in (-2.0, -0.4, 0.0, 1.1, 3.0):
        oracle = 0.5 + integrate.quad(_t_pdf, 0, x, args=(nu,))[0]
        assert specfun.student_t_cdf(x, nu) == pytest.approx(oracle, abs=1e-9)


def test_student_t_quantile_roundtrip():
    for nu in (2.2, 6.0, 50.0):
        for p in (0.01, 0.25, 0.5, 0.8, 0.999):
            x = specfun.student_t_quantile(p, nu)
            assert specfun.student_t_cdf(x, nu) == pytest.approx(p, abs=1e-10)


def test_student_t_domain():
    with pytest.raises(ValueError):
        specfun.student_t_cdf(0.0, 0.0)
    with pytest.raises(ValueError):
        specfun.student_t_quantile(0.0, 3.0)


def _chisq_pdf(x, k):
    return (x ** (k / 2 - 1) * math.exp(-x / 2)
            / (2 ** (k / 2) * math.exp(specfun.log_gamma(k / 2))))


def test_chisq_cdf_against_quadrature():
    for k in (1, 2, 5):
        for x in (0.1, 1.0, 3.84, 10.0):
            oracle = integrate.quad(_chisq_pdf, 0, x, args=(k,))[0]
            assert specfun.chisq_cdf(x, k) == pytest.approx(oracle, abs=1e-9)
    assert specfun.chisq_cdf(0.0, 3) == 0.0
    with pytest.raises(ValueError):
        specfun.chisq_cdf(1.0, 0)


def test_log_gamma_factorials():
    for n in range(1, 10):
        assert specfun.log_gamma(n + 1) == pytest.approx(
            math.log(math.factorial(n)), rel=1e-12)


def test_reg_inc_beta_and_gamma_basic_identities():
    # I_x(1, 1) = x and P(1, x) = 1 - exp(-x)
    for x in (0.1, 0.5, 0.9):
        assert specfun.reg_inc_beta(1.0, 1.0, x) == pytest.approx(x, abs=1e-12)
    for x in (0.2, 1.0, 4.0):
        assert specfun.reg_inc_gamma(1.0, x) == pytest.approx(
            1 - math.exp(-x), abs=1e-12)
