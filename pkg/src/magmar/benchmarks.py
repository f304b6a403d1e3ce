"""Benchmark models: first-order Markov copulas and Poisson count GLMs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import copulas as cop
from . import specfun as sf
from .copulas import CopulaParams, Family
from .inference import FitResult

VALID_REGRESSORS = ("intercept", "lag_log", "lag_raw", "climate_lag1", "climate_lag2")


def loglik_markov_copula(u, family: Family, params: CopulaParams) -> float:
    """Sum over t >= 2 of log c(U_t, U_{t-1})."""
    u = cop.clamp_u(np.asarray(u, dtype=float))
    if len(u) < 2:
        raise ValueError("need at least 2 observations")
    terms = np.asarray(cop.copula_log_density(family, params, u[1:], u[:-1]))
    if not np.all(np.isfinite(terms)):
        idx = int(np.argmax(~np.isfinite(np.atleast_1d(terms))))
        raise FloatingPointError(f"non-finite log-density term at t={idx + 2}")
    return float(np.sum(terms))


@dataclass(frozen=True)
class GlmSpec:
    """Poisson regression design: which regressors enter the log link."""

    regressors: tuple[str, ...] = ("intercept", "lag_log")

    def __post_init__(self):
        regs = tuple(self.regressors)
        if "intercept" not in regs:
            regs = ("intercept",) + regs
        for r in regs:
            if r not in VALID_REGRESSORS:
                raise ValueError(f"unknown regressor: {r!r}")
        object.__setattr__(self, "regressors", regs)

    @property
    def max_lag(self) -> int:
        lag = 0
        if "lag_log" in self.regressors or "lag_raw" in self.regressors:
            lag = 1
        if "climate_lag1" in self.regressors:
            lag = max(lag, 1)
        if "climate_lag2" in self.regressors:
            lag = max(lag, 2)
        return lag

    def needs_climate(self) -> bool:
        return "climate_lag1" in self.regressors or "climate_lag2" in self.regressors

    def row(self, a_prev: float, c_lag1: float | None = None,
            c_lag2: float | None = None) -> np.ndarray:
        cols = []
        for r in self.regressors:
            if r == "intercept":
                cols.append(1.0)
            elif r == "lag_log":
                cols.append(np.log1p(a_prev))
            elif r == "lag_raw":
                cols.append(float(a_prev))
            elif r == "climate_lag1":
                cols.append(float(c_lag1))
            else:
                cols.append(float(c_lag2))
        return np.array(cols)

    def design(self, a: np.ndarray, climate=None) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(a, dtype=float)
        if self.needs_climate():
            if climate is None:
                raise ValueError("GLM spec uses climate regressors but none supplied")
            climate = np.asarray(climate, dtype=float)
            if len(climate) != len(a):
                raise ValueError("climate must align with the count series")
        start = self.max_lag
        rows = []
        for t in range(start, len(a)):
            rows.append(self.row(
                a[t - 1] if t >= 1 else 0.0,
                climate[t - 1] if climate is not None and t >= 1 else None,
                climate[t - 2] if climate is not None and t >= 2 else None,
            ))
        return np.asarray(rows), a[start:]


def poisson_log_pmf(lam, a):
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    out = a * np.log(lam) - lam - sf.log_gamma(a + 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class GlmFit:
    spec: GlmSpec
    coef: dict
    loglik: float
    contributions: np.ndarray
    std_errors: dict | None
    aic: float
    bic: float
    n_obs: int
    converged: bool
    deviance_trace: list = field(default_factory=list)

    def linear_predictor(self, row: np.ndarray) -> float:
        beta = np.array([self.coef[r] for r in self.spec.regressors])
        return float(row @ beta)

    def predictive_log_pmf(self, a_next: int, a_prev: float,
                           c_lag1: float | None = None,
                           c_lag2: float | None = None) -> float:
        lam = np.exp(self.linear_predictor(self.spec.row(a_prev, c_lag1, c_lag2)))
        return poisson_log_pmf(lam, a_next)

    def to_fit_result(self) -> FitResult:
        return FitResult(
            model_kind="poisson_glm",
            estimates=dict(self.coef),
            std_errors=self.std_errors,
            loglik=self.loglik,
            contributions=self.contributions,
            aic=self.aic,
            bic=self.bic,
            n_obs=self.n_obs,
            n_params=len(self.coef),
            converged=self.converged,
            boundary_hits={},
            multistart=[],
        )


def fit_poisson_glm(a, spec: GlmSpec | None = None, climate=None,
                    tol: float = 1e-8, max_iter: int = 100) -> GlmFit:
    """Newton-Raphson (IRLS) Poisson regression with log link."""
    spec = spec or GlmSpec()
    a = np.asarray(a)
    if np.any(a < 0):
        raise ValueError("counts must be nonnegative")
    x, y = spec.design(a, climate)
    m, k = x.shape
    if m < k + 5:
        raise ValueError(f"too few observations ({m}) for {k} coefficients")
    if np.linalg.matrix_rank(x) < k:
        raise ValueError("design matrix is rank deficient")

    beta = np.zeros(k)
    beta[0] = np.log(max(y.mean(), 1e-8))
    deviance_trace = []
    converged = False
    for _ in range(max_iter):
        eta = np.clip(x @ beta, -30.0, 30.0)
        lam = np.exp(eta)
        with np.errstate(divide="ignore", invalid="ignore"):
            dev_terms = np.where(y > 0, y * np.log(y / lam), 0.0) - (y - lam)
        deviance_trace.append(float(2.0 * dev_terms.sum()))
        score = x.T @ (y - lam)
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        fisher = x.T @ (lam[:, None] * x)
        beta = beta + np.linalg.solve(fisher, score)
    if not converged:
        raise RuntimeError("Poisson GLM failed to converge")

    lam = np.exp(x @ beta)
    contrib = poisson_log_pmf(lam, y)
    loglik = float(np.sum(contrib))
    fisher = x.T @ (lam[:, None] * x)
    cov = np.linalg.inv(fisher)
    ses = {r: float(np.sqrt(cov[i, i])) for i, r in enumerate(spec.regressors)}
    return GlmFit(
        spec=spec,
        coef={r: float(b) for r, b in zip(spec.regressors, beta)},
        loglik=loglik,
        contributions=np.asarray(contrib),
        std_errors=ses,
        aic=float(2.0 * k - 2.0 * loglik),
        bic=float(k * np.log(m) - 2.0 * loglik),
        n_obs=m,
        converged=converged,
        deviance_trace=deviance_trace,
    )


def poisson_predictive_log_pmf(fit: GlmFit, a_next: int, a_prev: float,
                               c_lag1: float | None = None,
                               c_lag2: float | None = None) -> float:
    return fit.predictive_log_pmf(a_next, a_prev, c_lag1, c_lag2)
