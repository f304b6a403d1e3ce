"""Bivariate copula families: CDF, density, h-function, inverse h-function.

Convention used throughout: ``h(u1, u2) = P(U1 <= u1 | U2 = u2)``, the
conditional CDF of the first argument given the second.  Under this
convention ``d h / d u1`` equals the copula density, so the change of
variables from innovations to observations carries a unit Jacobian.

All kernels broadcast over numpy arrays in both the u-arguments and the
dependence parameter, which lets time-varying-parameter models and
Monte-Carlo path bundles evaluate in single vectorized calls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate

from . import specfun as sf

U_EPS = 1e-10

RHO_MAX = 1.0 - 1e-4
NU_MIN = 2.0 + 1e-3
NU_MAX = 1e6
ALPHA_MIN = 1.0 + 1e-6
ALPHA_MAX = 50.0

BOX_EDGE_TOL = 1e-3  # boundary-hit flagging distance (natural scale, relative for nu)


class Family(enum.Enum):
    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    STUDENT_T = "t"
    GUMBEL = "gumbel"

    @classmethod
    def parse(cls, name: str) -> "Family":
        name = name.strip().lower()
        for fam in cls:
            if fam.value == name or fam.name.lower() == name:
                return fam
        raise ValueError(f"unknown copula family: {name!r}")


@dataclass(frozen=True)
class CopulaParams:
    """Natural-scale parameters; only the fields used by the family are set."""

    rho: float | None = None
    nu: float | None = None
    alpha: float | None = None

    def validate(self, family: Family) -> None:
        if family is Family.INDEPENDENCE:
            return
        if family is Family.GAUSSIAN:
            if self.rho is None or not (-RHO_MAX <= self.rho <= RHO_MAX):
                raise ValueError(f"gaussian rho must lie in [{-RHO_MAX}, {RHO_MAX}]")
        elif family is Family.STUDENT_T:
            if self.rho is None or not (-RHO_MAX <= self.rho <= RHO_MAX):
                raise ValueError("t-copula rho out of range")
            if self.nu is None or not (NU_MIN <= self.nu <= NU_MAX):
                raise ValueError(f"t-copula nu must lie in [{NU_MIN}, {NU_MAX}]")
        elif family is Family.GUMBEL:
            if self.alpha is None or not (ALPHA_MIN <= self.alpha <= ALPHA_MAX):
                raise ValueError(f"gumbel alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}]")


def n_free_params(family: Family) -> int:
    return {Family.INDEPENDENCE: 0, Family.GAUSSIAN: 1,
            Family.STUDENT_T: 2, Family.GUMBEL: 1}[family]


def param_names(family: Family) -> tuple[str, ...]:
    return {Family.INDEPENDENCE: (), Family.GAUSSIAN: ("rho",),
            Family.STUDENT_T: ("rho", "nu"), Family.GUMBEL: ("alpha",)}[family]


# ---------------------------------------------------------------------------
# unconstrained reparameterization (for derivative-free optimization)
# ---------------------------------------------------------------------------

def to_unconstrained(family: Family, par: CopulaParams) -> np.ndarray:
    par.validate(family)
    if family is Family.INDEPENDENCE:
        return np.array([])
    if family is Family.GAUSSIAN:
        return np.array([np.arctanh(par.rho / RHO_MAX)])
    if family is Family.STUDENT_T:
        return np.array([np.arctanh(par.rho / RHO_MAX), np.log(par.nu - 2.0)])
    return np.array([np.log(par.alpha - 1.0)])


def from_unconstrained(family: Family, vec) -> tuple[CopulaParams, bool]:
    """Map an unconstrained vector back to the parameter box.

    Returns the parameters plus a flag marking whether any box clipping
    was active (reported as a boundary hit by the fitting layer).
    """
    vec = np.atleast_1d(np.asarray(vec, dtype=float))
    clipped = False
    if family is Family.INDEPENDENCE:
        return CopulaParams(), False
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        rho = RHO_MAX * np.tanh(vec[0])
        if family is Family.GAUSSIAN:
            return CopulaParams(rho=float(rho)), False
        nu = 2.0 + np.exp(min(vec[1], 700.0))
        if nu < NU_MIN or nu > NU_MAX:
            nu = min(max(nu, NU_MIN), NU_MAX)
            clipped = True
        return CopulaParams(rho=float(rho), nu=float(nu)), clipped
    alpha = 1.0 + np.exp(min(vec[0], 700.0))
    if alpha < ALPHA_MIN or alpha > ALPHA_MAX:
        alpha = min(max(alpha, ALPHA_MIN), ALPHA_MAX)
        clipped = True
    return CopulaParams(alpha=float(alpha)), clipped


def boundary_flags(family: Family, par: CopulaParams) -> dict[str, bool]:
    """Which parameters sit within BOX_EDGE_TOL of their box edge."""
    flags: dict[str, bool] = {}
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        flags["rho"] = abs(abs(par.rho) - RHO_MAX) < BOX_EDGE_TOL
    if family is Family.STUDENT_T:
        flags["nu"] = (par.nu - NU_MIN < BOX_EDGE_TOL) or (par.nu > NU_MAX * (1 - BOX_EDGE_TOL))
    if family is Family.GUMBEL:
        flags["alpha"] = (par.alpha - ALPHA_MIN < BOX_EDGE_TOL) or (ALPHA_MAX - par.alpha < BOX_EDGE_TOL)
    return flags


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def clamp_u(u):
    """Clamp to [U_EPS, 1 - U_EPS] before any quantile transform."""
    return np.clip(np.asarray(u, dtype=float), U_EPS, 1.0 - U_EPS)


def _check_finite(*args):
    for a in args:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise ValueError("non-finite input to copula function")


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Gaussian kernels (rho may be an array broadcasting with u1/u2)
# ---------------------------------------------------------------------------

def gaussian_log_density(u1, u2, rho):
    x = sf.std_normal_quantile(clamp_u(u1))
    y = sf.std_normal_quantile(clamp_u(u2))
    rho = np.asarray(rho, dtype=float)
    omr2 = 1.0 - rho * rho
    return _out(-0.5 * np.log(omr2)
                - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * omr2))


def gaussian_h(u1, u2, rho):
    x = sf.std_normal_quantile(clamp_u(u1))
    y = sf.std_normal_quantile(clamp_u(u2))
    rho = np.asarray(rho, dtype=float)
    return _out(sf.std_normal_cdf((x - rho * y) / np.sqrt(1.0 - rho * rho)))


def gaussian_h_inv(v, u2, rho):
    zv = sf.std_normal_quantile(clamp_u(v))
    y = sf.std_normal_quantile(clamp_u(u2))
    rho = np.asarray(rho, dtype=float)
    return _out(sf.std_normal_cdf(zv * np.sqrt(1.0 - rho * rho) + rho * y))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def gaussian_cdf(u1, u2, rho):
    """Bivariate-normal copula CDF via the arcsine-parameter integral.

    C(u1,u2) = u1*u2 + (1/2pi) * int_0^{asin(rho)} exp(-(x^2 - 2xy sin t + y^2)
    / (2 cos^2 t)) dt, which stays smooth as |rho| -> 1.
    """
    x = sf.std_normal_quantile(clamp_u(u1))
    y = sf.std_normal_quantile(clamp_u(u2))
    rho = np.asarray(rho, dtype=float)
    a = np.arcsin(rho)
    x, y, a = np.broadcast_arrays(np.asarray(x), np.asarray(y), a)
    t = 0.5 * a[..., None] * (_GL_NODES + 1.0)
    cos2 = np.cos(t) ** 2
    integrand = np.exp(-(x[..., None] ** 2 - 2.0 * x[..., None] * y[..., None] * np.sin(t)
                         + y[..., None] ** 2) / (2.0 * cos2))
    corr = (0.5 * a / (2.0 * np.pi)) * np.sum(_GL_WEIGHTS * integrand, axis=-1)
    u1c, u2c = clamp_u(u1), clamp_u(u2)
    return _out(u1c * u2c + corr)


# ---------------------------------------------------------------------------
# Student-t kernels
# ---------------------------------------------------------------------------

def student_log_density(u1, u2, rho, nu):
    x = sf.student_t_quantile(clamp_u(u1), nu)
    y = sf.student_t_quantile(clamp_u(u2), nu)
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    omr2 = 1.0 - rho * rho
    quad = (x * x - 2.0 * rho * x * y + y * y) / (nu * omr2)
    return _out(
        sf.log_gamma((nu + 2.0) / 2.0) + sf.log_gamma(nu / 2.0)
        - 2.0 * sf.log_gamma((nu + 1.0) / 2.0)
        - 0.5 * np.log(omr2)
        - (nu + 2.0) / 2.0 * np.log1p(quad)
        + (nu + 1.0) / 2.0 * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
    )


def _student_cond_scale(y, rho, nu):
    return np.sqrt((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0))


def student_h(u1, u2, rho, nu):
    x = sf.student_t_quantile(clamp_u(u1), nu)
    y = sf.student_t_quantile(clamp_u(u2), nu)
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return _out(sf.student_t_cdf((x - rho * y) / _student_cond_scale(y, rho, nu), nu + 1.0))


def student_h_inv(v, u2, rho, nu):
    y = sf.student_t_quantile(clamp_u(u2), nu)
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    zv = sf.student_t_quantile(clamp_u(v), nu + 1.0)
    x = zv * _student_cond_scale(y, rho, nu) + rho * y
    return _out(sf.student_t_cdf(x, nu))


def student_cdf(u1, u2, rho, nu):
    """t-copula CDF by adaptive quadrature of the h-function (test use only)."""
    u1 = float(u1)

    def integrand(v):
        return student_h(u1, v, rho, nu)

    val, _ = _integrate.quad(integrand, 0.0, float(u2), epsabs=1e-9, limit=200)
    return val


# ---------------------------------------------------------------------------
# Gumbel kernels (computed in log space)
# ---------------------------------------------------------------------------

def _gumbel_parts(u1, u2, alpha):
    u1c, u2c = clamp_u(u1), clamp_u(u2)
    lx = -np.log(u1c)   # > 0
    ly = -np.log(u2c)
    alpha = np.asarray(alpha, dtype=float)
    log_s = np.logaddexp(alpha * np.log(lx), alpha * np.log(ly))
    s_a = np.exp(log_s / alpha)   # S^{1/alpha}
    return u1c, u2c, lx, ly, alpha, log_s, s_a


def gumbel_log_cdf(u1, u2, alpha):
    _, _, _, _, _, _, s_a = _gumbel_parts(u1, u2, alpha)
    return _out(-s_a)


def gumbel_cdf(u1, u2, alpha):
    return _out(np.exp(gumbel_log_cdf(u1, u2, alpha)))


def gumbel_log_density(u1, u2, alpha):
    u1c, u2c, lx, ly, alpha, log_s, s_a = _gumbel_parts(u1, u2, alpha)
    return _out(
        -s_a
        + (2.0 / alpha - 2.0) * log_s
        + (alpha - 1.0) * (np.log(lx) + np.log(ly))
        + np.log1p((alpha - 1.0) / s_a)
        - np.log(u1c) - np.log(u2c)
    )


def gumbel_log_h(u1, u2, alpha):
    """log of dC/du2 = C * S^{1/alpha - 1} * (-ln u2)^{alpha-1} / u2."""
    _, u2c, _, ly, alpha, log_s, s_a = _gumbel_parts(u1, u2, alpha)
    return _out(-s_a + (1.0 / alpha - 1.0) * log_s
                + (alpha - 1.0) * np.log(ly) - np.log(u2c))


def gumbel_h(u1, u2, alpha):
    return _out(np.exp(gumbel_log_h(u1, u2, alpha)))


def gumbel_h_inv(v, u2, alpha, tol=1e-12, max_iter=200):
    """Invert u1 -> h(u1, u2) by safeguarded Newton with a bisection bracket."""
    v_arr, u2_arr, alpha_arr = np.broadcast_arrays(
        clamp_u(v), clamp_u(u2), np.asarray(alpha, dtype=float))
    scalar = v_arr.ndim == 0
    v_arr = np.atleast_1d(v_arr).astype(float)
    u2_arr = np.atleast_1d(u2_arr).astype(float)
    alpha_arr = np.atleast_1d(alpha_arr).astype(float)

    lo = np.full_like(v_arr, U_EPS)
    hi = np.full_like(v_arr, 1.0 - U_EPS)
    u1 = v_arr.copy()
    for _ in range(max_iter):
        f = gumbel_h(u1, u2_arr, alpha_arr) - v_arr
        lo = np.where(f < 0.0, u1, lo)
        hi = np.where(f > 0.0, u1, hi)
        if np.all(np.abs(f) < tol):
            break
        dens = np.exp(gumbel_log_density(u1, u2_arr, alpha_arr))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dens > 0.0, f / dens, 0.0)
        cand = u1 - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        u1 = np.where(bad, 0.5 * (lo + hi), cand)
    if np.any(hi - lo < 0.0):
        raise RuntimeError("gumbel_h_inv: bracket collapsed")
    return float(u1[0]) if scalar else u1


# ---------------------------------------------------------------------------
# raw-parameter dispatch (kw values may be arrays for time-varying parameters)
# ---------------------------------------------------------------------------

def params_to_kwargs(family: Family, par: CopulaParams) -> dict:
    if family is Family.GAUSSIAN:
        return {"rho": par.rho}
    if family is Family.STUDENT_T:
        return {"rho": par.rho, "nu": par.nu}
    if family is Family.GUMBEL:
        return {"alpha": par.alpha}
    return {}


def h_raw(family: Family, kw: dict, u1, u2):
    if family is Family.INDEPENDENCE:
        return clamp_u(u1) + 0.0 * np.asarray(u2, dtype=float)
    if family is Family.GAUSSIAN:
        return gaussian_h(u1, u2, kw["rho"])
    if family is Family.STUDENT_T:
        return student_h(u1, u2, kw["rho"], kw["nu"])
    return gumbel_h(u1, u2, kw["alpha"])


def h_inv_raw(family: Family, kw: dict, v, u2):
    if family is Family.INDEPENDENCE:
        return clamp_u(v) + 0.0 * np.asarray(u2, dtype=float)
    if family is Family.GAUSSIAN:
        return gaussian_h_inv(v, u2, kw["rho"])
    if family is Family.STUDENT_T:
        return student_h_inv(v, u2, kw["rho"], kw["nu"])
    return gumbel_h_inv(v, u2, kw["alpha"])


def log_density_raw(family: Family, kw: dict, u1, u2):
    if family is Family.INDEPENDENCE:
        return _out(np.zeros(np.broadcast(np.asarray(u1), np.asarray(u2)).shape))
    if family is Family.GAUSSIAN:
        return gaussian_log_density(u1, u2, kw["rho"])
    if family is Family.STUDENT_T:
        return student_log_density(u1, u2, kw["rho"], kw["nu"])
    return gumbel_log_density(u1, u2, kw["alpha"])


# ---------------------------------------------------------------------------
# family dispatch
# ---------------------------------------------------------------------------

def copula_cdf(family: Family, par: CopulaParams, u1, u2):
    _check_finite(u1, u2)
    u1c, u2c = clamp_u(u1), clamp_u(u2)
    if family is Family.INDEPENDENCE:
        return _out(u1c * u2c)
    if family is Family.GAUSSIAN:
        return gaussian_cdf(u1c, u2c, par.rho)
    if family is Family.STUDENT_T:
        return student_cdf(u1c, u2c, par.rho, par.nu)
    return gumbel_cdf(u1c, u2c, par.alpha)


def copula_log_density(family: Family, par: CopulaParams, u1, u2):
    _check_finite(u1, u2)
    if family is Family.INDEPENDENCE:
        return _out(np.zeros(np.broadcast(np.asarray(u1), np.asarray(u2)).shape))
    if family is Family.GAUSSIAN:
        return gaussian_log_density(u1, u2, par.rho)
    if family is Family.STUDENT_T:
        return student_log_density(u1, u2, par.rho, par.nu)
    return gumbel_log_density(u1, u2, par.alpha)


def copula_density(family: Family, par: CopulaParams, u1, u2):
    return _out(np.exp(copula_log_density(family, par, u1, u2)))


def h(family: Family, par: CopulaParams, u1, u2):
    """Conditional CDF P(U1 <= u1 | U2 = u2); strictly increasing in u1."""
    _check_finite(u1, u2)
    if family is Family.INDEPENDENCE:
        return _out(clamp_u(u1) + 0.0 * np.asarray(u2, dtype=float))
    if family is Family.GAUSSIAN:
        return gaussian_h(u1, u2, par.rho)
    if family is Family.STUDENT_T:
        return student_h(u1, u2, par.rho, par.nu)
    return gumbel_h(u1, u2, par.alpha)


def h_inv(family: Family, par: CopulaParams, v, u2):
    """The unique u1 in (0,1) with h(u1, u2) = v."""
    _check_finite(v, u2)
    if family is Family.INDEPENDENCE:
        return _out(clamp_u(v) + 0.0 * np.asarray(u2, dtype=float))
    if family is Family.GAUSSIAN:
        return gaussian_h_inv(v, u2, par.rho)
    if family is Family.STUDENT_T:
        return student_h_inv(v, u2, par.rho, par.nu)
    return gumbel_h_inv(v, u2, par.alpha)
