"""Model selection and risk: information criteria, LR test, rolling
one-step-ahead log-scores, and Monte-Carlo plug-in VaR/ES."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import copulas as cop
from .benchmarks import GlmSpec, fit_poisson_glm
from .copulas import Family
from .inference import FitConfig, FitResult, fit, loglik_for_spec
from .process import ModelKind, ModelSpec
from .rng import Rng, derive_seed
from .specfun import chisq_cdf

SCORE_BOUND = 700.0  # |log-score| beyond this is flagged "unbounded"


def information_criteria(loglik: float, k: int, n_eff: int | None = None):
    """AIC = 2k - 2 logL; BIC = k ln(n_eff) - 2 logL (None without n_eff)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    aic = 2.0 * k - 2.0 * loglik
    bic = None
    if n_eff is not None:
        if n_eff < 1:
            raise ValueError("n_eff must be >= 1")
        bic = k * np.log(n_eff) - 2.0 * loglik
    return float(aic), (None if bic is None else float(bic))


def lr_test(loglik_unrestricted: float, loglik_restricted: float, df: int):
    """Likelihood-ratio statistic 2*(L1 - L0) against chi-square(df)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if loglik_unrestricted < loglik_restricted - 1e-6:
        raise ValueError("unrestricted log-likelihood below restricted beyond tolerance")
    stat = 2.0 * (loglik_unrestricted - loglik_restricted)
    clipped = stat < 0.0
    if clipped:
        import warnings
        warnings.warn("negative LR statistic clipped to 0 (optimizer noise)", stacklevel=2)
        stat = 0.0
    p = 1.0 - chisq_cdf(stat, df)
    return float(stat), float(p)


@dataclass
class RollingResult:
    """Per-origin one-step-ahead log-scores from an expanding window."""

    origins: list
    scores: list                 # retained scores, aligned with origins
    average: float
    n_unbounded: int
    n_failed: int
    unbounded_origins: list = field(default_factory=list)
    failed_origins: list = field(default_factory=list)
    score_kind: str = "density"  # "density" (copula) or "pmf" (count model)


def rolling_log_score(series, model, min_window: int, refit_every: int = 1,
                      config: FitConfig | None = None, climate=None,
                      fixed: dict | None = None) -> RollingResult:
    """Expanding-window one-step-ahead log-scores.

    ``model`` is either a ModelSpec (series = transformed u) or a GlmSpec
    (series = raw counts).  Scores with |value| > 700 are flagged
    unbounded and excluded from the average; failed refits skip a step.
    """
    series = np.asarray(series, dtype=float)
    n = len(series)
    if n <= min_window + 1:
        raise ValueError("series too short for the requested window")
    config = config or FitConfig()
    is_glm = isinstance(model, GlmSpec)

    origins, scores = [], []
    unbounded, failed = [], []
    current_fit = None
    for t in range(min_window, n):
        need_refit = current_fit is None or (t - min_window) % refit_every == 0
        if need_refit:
            try:
                if is_glm:
                    current_fit = fit_poisson_glm(
                        series[:t], model,
                        climate=None if climate is None else climate[:t])
                else:
                    current_fit = fit(series[:t], model, config=config,
                                      climate=None if climate is None else climate[:t],
                                      fixed=fixed)
            except (RuntimeError, ValueError, FloatingPointError, np.linalg.LinAlgError):
                current_fit = None
                failed.append(t)
                continue
        if current_fit is None:
            failed.append(t)
            continue
        try:
            if is_glm:
                score = current_fit.predictive_log_pmf(
                    int(series[t]), series[t - 1],
                    None if climate is None else climate[t - 1],
                    None if climate is None or t < 2 else climate[t - 2])
            else:
                _, _, contrib = loglik_for_spec(
                    series[:t + 1], current_fit.spec,
                    climate=None if climate is None else climate[:t + 1],
                    w0=config.w0, u0=config.u0)
                score = float(contrib[-1])
        except (FloatingPointError, ValueError, RuntimeError):
            failed.append(t)
            continue
        if abs(score) > SCORE_BOUND or not np.isfinite(score):
            unbounded.append(t)
            continue
        origins.append(t)
        scores.append(score)

    average = float(np.mean(scores)) if scores else float("nan")
    return RollingResult(
        origins=origins, scores=scores, average=average,
        n_unbounded=len(unbounded), n_failed=len(failed),
        unbounded_origins=unbounded, failed_origins=failed,
        score_kind="pmf" if is_glm else "density",
    )


# ---------------------------------------------------------------------------
# plug-in Monte-Carlo risk measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskState:
    """Conditioning state: last filtered innovation and (MAGMAR/Markov) last u."""

    w: float = 0.5
    u: float | None = None


@dataclass
class RiskReport:
    horizon: int
    alpha: float
    var: float
    es: float
    paths: int
    seed: int
    var_se: float

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "alpha": self.alpha, "var": self.var,
                "es": self.es, "paths": self.paths, "seed": self.seed,
                "var_se": self.var_se}

    def to_text(self) -> str:
        return "\n".join(f"{k:<10}{v}" for k, v in self.to_dict().items())


def _order_statistic_var(x: np.ndarray, alpha: float) -> float:
    k = int(np.ceil(alpha * len(x)))
    return float(np.partition(x, k - 1)[k - 1])


def simulate_conditional_paths(spec: ModelSpec, state: RiskState, horizon: int,
                               n_paths: int, seed: int) -> np.ndarray:
    """U_{t+h} over n_paths Monte-Carlo continuations of the current state."""
    if spec.climate_link is not None:
        raise ValueError("conditional path simulation supports homogeneous specs only")
    rng = Rng(seed)
    mag_kw = cop.params_to_kwargs(spec.mag_family, spec.mag_params)
    ar_kw = cop.params_to_kwargs(spec.ar_family, spec.ar_params)
    w_prev = np.full(n_paths, float(state.w))
    u_prev = None
    if spec.kind is not ModelKind.MAG1:
        if state.u is None:
            raise ValueError(f"{spec.kind.value} requires the last observation in the state")
        u_prev = np.full(n_paths, float(state.u))
    u_new = None
    for _ in range(horizon):
        w_new = rng.uniforms(n_paths)
        if spec.kind is ModelKind.MAG1:
            u_new = np.asarray(cop.h_inv_raw(spec.mag_family, mag_kw, w_new, w_prev))
        elif spec.kind is ModelKind.MARKOV:
            u_new = np.asarray(cop.h_inv_raw(spec.ar_family, ar_kw, w_new, u_prev))
            u_prev = u_new
        else:
            inner = np.asarray(cop.h_inv_raw(spec.mag_family, mag_kw, w_new, w_prev))
            u_new = np.asarray(cop.h_inv_raw(spec.ar_family, ar_kw, inner, u_prev))
            u_prev = u_new
        w_prev = w_new
    return u_new


def plug_in_risk(spec: ModelSpec, state: RiskState, marginal_inverse=None,
                 horizon: int = 1, alpha: float = 0.05, n_paths: int = 100_000,
                 seed: int = 0, n_batches: int = 20) -> RiskReport:
    """Monte-Carlo plug-in lower-tail VaR and ES of X_{t+h} = F_X^{-1}(U_{t+h}).

    VaR is the ceil(alpha*M)-th order statistic (no interpolation), so it
    commutes exactly with monotone marginal transforms; ES is the mean of
    the values at or below it.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if n_paths < 10_000:
        raise ValueError("n_paths must be >= 10^4")
    if alpha * n_paths < 10:
        raise ValueError("fewer than 10 expected tail observations (alpha * M < 10)")
    u = simulate_conditional_paths(spec, state, horizon, n_paths, seed)
    x = np.asarray(marginal_inverse(u)) if marginal_inverse is not None else u
    var = _order_statistic_var(x, alpha)
    tail = x[x <= var]
    es = float(np.mean(tail))
    batch = len(x) // n_batches
    batch_vars = [
        _order_statistic_var(x[i * batch:(i + 1) * batch], alpha)
        for i in range(n_batches)
    ]
    var_se = float(np.std(batch_vars, ddof=1) / np.sqrt(n_batches))
    return RiskReport(horizon=horizon, alpha=alpha, var=var, es=es,
                      paths=n_paths, seed=seed, var_se=var_se)


# ---------------------------------------------------------------------------
# comparison table
# ---------------------------------------------------------------------------

@dataclass
class ComparisonRow:
    model: str
    family: str
    loglik: float
    k: int
    aic: float
    bic: float | None
    avg_oos: float | None = None
    flags: str = ""
    score_kind: str = "density"

    @classmethod
    def from_fit(cls, name: str, family: str, res: FitResult,
                 rolling: RollingResult | None = None) -> "ComparisonRow":
        flags = []
        if rolling is not None and rolling.n_unbounded > 0:
            flags.append(f"unbounded:{rolling.n_unbounded}")
        if rolling is not None and rolling.n_failed > 0:
            flags.append(f"skipped:{rolling.n_failed}")
        if any(res.boundary_hits.values()):
            flags.append("boundary")
        return cls(model=name, family=family, loglik=res.loglik, k=res.n_params,
                   aic=res.aic, bic=res.bic,
                   avg_oos=None if rolling is None else rolling.average,
                   flags=";".join(flags),
                   score_kind="density" if rolling is None else rolling.score_kind)


COMPARISON_COLUMNS = ("model", "family", "logL", "k", "AIC", "BIC", "avg_oos", "flags")


def comparison_csv(rows: list[ComparisonRow]) -> str:
    lines = [",".join(COMPARISON_COLUMNS)]
    for r in rows:
        lines.append(",".join([
            r.model, r.family, f"{r.loglik:.6f}", str(r.k), f"{r.aic:.6f}",
            "" if r.bic is None else f"{r.bic:.6f}",
            "" if r.avg_oos is None else f"{r.avg_oos:.6f}",
            r.flags,
        ]))
    return "\n".join(lines) + "\n"


def comparison_text(rows: list[ComparisonRow]) -> str:
    header = (f"{'model':<24}{'family':<12}{'logL':>12}{'k':>4}{'AIC':>12}"
              f"{'BIC':>12}{'avg_oos':>10}  flags")
    lines = [header, "-" * len(header)]
    for r in rows:
        bic = "n/a" if r.bic is None else f"{r.bic:.2f}"
        oos = "n/a" if r.avg_oos is None else f"{r.avg_oos:.3f}"
        lines.append(f"{r.model:<24}{r.family:<12}{r.loglik:>12.2f}{r.k:>4}"
                     f"{r.aic:>12.2f}{bic:>12}{oos:>10}  {r.flags}")
    kinds = {r.score_kind for r in rows if r.avg_oos is not None}
    if len(kinds) > 1:
        lines.append("note: density (copula) and pmf (count-model) log-scores "
                     "are in non-comparable units")
    return "\n".join(lines) + "\n"
