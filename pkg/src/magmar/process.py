"""Model specifications and seeded simulation of the copula recursions.

Recursions (innovations W_t iid Uniform(0,1)):

* MAG(1):        U_t = h_inv(W_t, W_{t-1}) under the MAG copula.
* MAGMAR(1,1):   U_t = h_inv_ar( h_inv_mag(W_t, W_{t-1}), U_{t-1} ).
* Markov copula: U_t = h_inv_ar(W_t, U_{t-1}).

Climate-linked variants recompute the linked dependence parameter each
step from the lagged covariate C_{t-1} through a tanh (correlation-type
targets) or 1+exp (Gumbel targets) link.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import copulas as cop
from . import specfun as sf
from .copulas import CopulaParams, Family
from .rng import Rng

DEFAULT_BURN_IN = 500


class ModelKind(enum.Enum):
    MAG1 = "mag1"
    MAGMAR11 = "magmar11"
    MARKOV = "markov"

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        name = name.strip().lower()
        for k in cls:
            if k.value == name or k.name.lower() == name:
                return k
        raise ValueError(f"unknown model kind: {name!r}")


@dataclass(frozen=True)
class ClimateLink:
    """Smooth link driving one dependence parameter from lagged climate."""

    link: str                 # "tanh" or "one-plus-exp"
    beta0: float
    beta1: float
    target: str               # "mag-parameter" or "ar-parameter"

    def __post_init__(self):
        if self.link not in ("tanh", "one-plus-exp"):
            raise ValueError(f"unknown climate link: {self.link!r}")
        if self.target not in ("mag-parameter", "ar-parameter"):
            raise ValueError(f"unknown climate link target: {self.target!r}")

    def param_values(self, climate_lag) -> np.ndarray:
        """Linked parameter value(s) from C_{t-1}; clipped to the parameter box."""
        eta = self.beta0 + self.beta1 * np.asarray(climate_lag, dtype=float)
        if not np.all(np.isfinite(eta)):
            raise ValueError("climate link produced non-finite linear predictor")
        if self.link == "tanh":
            return np.clip(np.tanh(eta), -cop.RHO_MAX, cop.RHO_MAX)
        return np.clip(1.0 + np.exp(np.minimum(eta, 700.0)), cop.ALPHA_MIN, cop.ALPHA_MAX)


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    mag_family: Family = Family.INDEPENDENCE
    mag_params: CopulaParams = field(default_factory=CopulaParams)
    ar_family: Family = Family.INDEPENDENCE
    ar_params: CopulaParams = field(default_factory=CopulaParams)
    climate_link: ClimateLink | None = None

    def __post_init__(self):
        if self.kind is ModelKind.MAG1 and self.ar_family is not Family.INDEPENDENCE:
            raise ValueError("MAG(1) has no autoregressive copula slot")
        if self.kind is ModelKind.MARKOV and self.mag_family is not Family.INDEPENDENCE:
            raise ValueError("Markov copula has no MAG slot")
        link = self.climate_link
        mag_linked = link is not None and link.target == "mag-parameter"
        ar_linked = link is not None and link.target == "ar-parameter"
        # a climate-linked slot carries its dependence parameter in the betas
        if not mag_linked:
            self.mag_params.validate(self.mag_family)
        elif self.mag_family is Family.STUDENT_T and self.mag_params.nu is None:
            raise ValueError("climate-linked t slot still requires homogeneous nu")
        if not ar_linked:
            self.ar_params.validate(self.ar_family)
        elif self.ar_family is Family.STUDENT_T and self.ar_params.nu is None:
            raise ValueError("climate-linked t slot still requires homogeneous nu")
        if link is not None:
            if link.target == "ar-parameter" and self.kind is not ModelKind.MAGMAR11:
                raise ValueError("ar-parameter climate link requires MAGMAR(1,1)")
            target_family = self.mag_family if link.target == "mag-parameter" else self.ar_family
            if link.link == "one-plus-exp" and target_family is not Family.GUMBEL:
                raise ValueError("one-plus-exp link is only valid for a Gumbel target")
            if link.link == "tanh" and target_family is Family.GUMBEL:
                raise ValueError("tanh link is not valid for a Gumbel target")

    @property
    def is_homogeneous(self) -> bool:
        return self.climate_link is None


@dataclass
class StatePath:
    """Simulated path after burn-in: observations u, innovations w, covariate."""

    u: np.ndarray
    w: np.ndarray
    climate: np.ndarray | None = None

    def __post_init__(self):
        if len(self.u) != len(self.w):
            raise ValueError("u and w must have equal length")


def _linked_param_dict(spec: ModelSpec, slot: str, climate_lag) -> dict:
    """Raw kwargs for the low-level kernels, with the linked slot as an array."""
    link = spec.climate_link
    family = spec.mag_family if slot == "mag" else spec.ar_family
    params = spec.mag_params if slot == "mag" else spec.ar_params
    target = "mag-parameter" if slot == "mag" else "ar-parameter"
    if link is not None and link.target == target:
        vals = link.param_values(climate_lag)
        if family is Family.GUMBEL:
            return {"alpha": vals}
        if family is Family.STUDENT_T:
            return {"rho": vals, "nu": params.nu}
        return {"rho": vals}
    if family is Family.GUMBEL:
        return {"alpha": params.alpha}
    if family is Family.STUDENT_T:
        return {"rho": params.rho, "nu": params.nu}
    if family is Family.GAUSSIAN:
        return {"rho": params.rho}
    return {}


_h_inv_raw = cop.h_inv_raw


def _ar_recursion(family: Family, kw: dict, inner: np.ndarray, u0: float) -> np.ndarray:
    """u_t = h_inv(inner_t, u_{t-1}); vectorized for the homogeneous Gaussian slot."""
    n = len(inner)
    if family is Family.INDEPENDENCE:
        return cop.clamp_u(inner)
    if family is Family.GAUSSIAN and np.ndim(kw["rho"]) == 0:
        rho = float(kw["rho"])
        z = sf.std_normal_quantile(cop.clamp_u(inner))
        s = np.sqrt(1.0 - rho * rho)
        x0 = sf.std_normal_quantile(cop.clamp_u(u0))
        x, _ = lfilter([s], [1.0, -rho], z, zi=np.array([rho * x0]))
        return cop.clamp_u(sf.std_normal_cdf(x))
    u = np.empty(n)
    prev = u0
    for t in range(n):
        kw_t = {k: (v if np.ndim(v) == 0 else v[t]) for k, v in kw.items()}
        prev = float(_h_inv_raw(family, kw_t, inner[t], prev))
        u[t] = prev
    return u


def simulate(spec: ModelSpec, n: int, burn_in: int = DEFAULT_BURN_IN,
             seed: int = 0, climate=None) -> StatePath:
    """Simulate n post-burn-in observations; bit-identical for equal inputs."""
    if n < 2:
        raise ValueError("simulate: n must be >= 2")
    total = burn_in + n
    if spec.climate_link is not None:
        if climate is None:
            raise ValueError("climate-linked spec requires a climate sequence")
        climate = np.asarray(climate, dtype=float)
        if len(climate) < total:
            raise ValueError(f"climate sequence too short: need >= {total}")
        climate = climate[:total]
    rng = Rng(seed)
    # w[0] initializes the recursion; u_0 drawn at independence for AR slots
    w = rng.uniforms(total + 1)
    u0 = rng.uniform()
    clim_lag = climate if climate is not None else None

    if spec.kind is ModelKind.MAG1:
        kw = _linked_param_dict(spec, "mag", clim_lag)
        u = np.asarray(_h_inv_raw(spec.mag_family, kw, w[1:], w[:-1]), dtype=float)
    elif spec.kind is ModelKind.MARKOV:
        kw = _linked_param_dict(spec, "ar", clim_lag)
        u = _ar_recursion(spec.ar_family, kw, w[1:], u0)
    else:  # MAGMAR(1,1)
        kw_mag = _linked_param_dict(spec, "mag", clim_lag)
        inner = np.asarray(_h_inv_raw(spec.mag_family, kw_mag, w[1:], w[:-1]), dtype=float)
        kw_ar = _linked_param_dict(spec, "ar", clim_lag)
        u = _ar_recursion(spec.ar_family, kw_ar, inner, u0)

    u = np.atleast_1d(u)
    keep = slice(burn_in, total)
    return StatePath(
        u=u[keep].copy(),
        w=w[1:][keep].copy(),
        climate=None if climate is None else climate[keep].copy(),
    )


class PiecewiseCdf:
    """Monotone piecewise-linear CDF on (0,1) built from a simulated sample."""

    def __init__(self, knots: np.ndarray, values: np.ndarray):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(knots) != len(values) or len(knots) < 2:
            raise ValueError("need matching knot/value arrays of length >= 2")
        if np.any(np.diff(knots) <= 0) or np.any(np.diff(values) <= 0):
            raise ValueError("knots and values must be strictly increasing")
        self.knots = knots
        self.values = values

    def __call__(self, u):
        out = np.interp(np.asarray(u, dtype=float), self.knots, self.values,
                        left=self.values[0], right=self.values[-1])
        out = np.clip(out, cop.U_EPS, 1.0 - cop.U_EPS)
        return float(out) if np.ndim(u) == 0 else out

    def inverse(self, v):
        out = np.interp(np.asarray(v, dtype=float), self.values, self.knots,
                        left=self.knots[0], right=self.knots[-1])
        out = np.clip(out, cop.U_EPS, 1.0 - cop.U_EPS)
        return float(out) if np.ndim(v) == 0 else out

    def density(self, u):
        """Piecewise-constant derivative of the piecewise-linear CDF."""
        u = np.asarray(u, dtype=float)
        seg = np.clip(np.searchsorted(self.knots, u, side="right") - 1,
                      0, len(self.knots) - 2)
        slope = np.diff(self.values) / np.diff(self.knots)
        out = slope[seg]
        return float(out) if np.ndim(u) == 0 else out

    @classmethod
    def identity(cls) -> "PiecewiseCdf":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 1.0]))

    @classmethod
    def from_sample(cls, sample: np.ndarray, n_knots: int = 1024) -> "PiecewiseCdf":
        xs = np.sort(np.asarray(sample, dtype=float))
        if xs[0] == xs[-1]:
            raise ValueError("degenerate sample: all values equal")
        m = len(xs)
        idx = np.unique(np.linspace(0, m - 1, min(n_knots, m)).astype(int))
        knots = xs[idx]
        values = (idx + 1.0) / (m + 1.0)
        # ties in the sample collapse to one knot; keeping the first
        # occurrence preserves strict monotonicity of the values
        uniq, first = np.unique(knots, return_index=True)
        knots, values = uniq, values[first]
        if knots[0] > 0.0:
            knots = np.concatenate(([0.0], knots))
            values = np.concatenate(([0.0], values))
        if knots[-1] < 1.0:
            knots = np.append(knots, 1.0)
            values = np.append(values, 1.0)
        return cls(knots, values)


def stationary_marginal_cdf(spec: ModelSpec, m: int = 100_000, seed: int = 0,
                            burn_in: int = DEFAULT_BURN_IN,
                            n_knots: int = 1024) -> PiecewiseCdf:
    """Simulation estimate of the stationary marginal CDF of U_t."""
    if m < 10_000:
        raise ValueError("stationary_marginal_cdf: m must be >= 10^4")
    if spec.climate_link is not None:
        raise ValueError("stationary marginal is defined for homogeneous specs only")
    path = simulate(spec, m, burn_in=burn_in, seed=seed)
    return PiecewiseCdf.from_sample(path.u, n_knots=n_knots)


def apply_psi(psi, u):
    """Elementwise CDF transform, clamped into the open unit interval."""
    u = np.asarray(u, dtype=float)
    out = np.clip(psi(u), cop.U_EPS, 1.0 - cop.U_EPS)
    return out


def make_ar1_climate(n: int, phi: float = 0.6, scale: float = 0.8,
                     seed: int = 0, bound: float = 3.0) -> np.ndarray:
    """Exogenous bounded AR(1) covariate helper for simulation experiments."""
    rng = Rng(derive_seed_for_climate(seed))
    eps = sf.std_normal_quantile(rng.uniforms(n)) * scale
    c = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = float(np.clip(phi * prev + eps[t], -bound, bound))
        c[t] = prev
    return c


def derive_seed_for_climate(seed: int) -> int:
    from .rng import derive_seed
    return derive_seed(seed, 0xC11A)
