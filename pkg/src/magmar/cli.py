"""Command-line front end: ingest -> aggregate -> transform -> fit ->
compare -> forecast -> risk, with reproducible, header-stamped outputs.

Exit codes: 0 success, 2 validation/user error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__, plots
from .benchmarks import GlmSpec, fit_poisson_glm
from .copulas import CopulaParams, Family
from .inference import (FitConfig, FitResult, fit, fit_adjusted_two_step,
                        spec_from_dict, spec_to_dict)
from .pipeline import (ActivitySeries, IngestError, RatingsSchema, aggregate,
                       ingest_climate, ingest_ratings)
from .process import ClimateLink, ModelKind, ModelSpec, simulate
from .selection import (ComparisonRow, RiskReport, RiskState, comparison_csv,
                        comparison_text, lr_test, plug_in_risk, rolling_log_score,
                        simulate_conditional_paths)
from .transform import DiscreteMarginal, empirical_marginal, mixed_difference


class UserError(Exception):
    """Validation or usage problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _r(x) -> str:
    """Full-precision decimal text for a float, round-trip safe."""
    return repr(float(x))


def _config_hash(config: dict) -> str:
    # the destination path does not affect the analysis, so equal runs
    # hash equal no matter where they are written
    hashed = {k: v for k, v in config.items() if k != "out"}
    blob = json.dumps(hashed, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _header_block(config: dict, seeds: dict | None = None) -> str:
    lines = [f"# magmar {__version__}", f"# config_hash {_config_hash(config)}"]
    for key, val in sorted((seeds or {}).items()):
        lines.append(f"# seed {key} {val}")
    return "\n".join(lines) + "\n"


def _write_output(path: str, body: str, config: dict, seeds: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_block(config, seeds))
        fh.write(body)


def _write_json(path: str, payload: dict, config: dict, seeds: dict | None = None):
    doc = {"meta": {"tool": f"magmar {__version__}",
                    "config_hash": _config_hash(config),
                    "seeds": seeds or {}},
           **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_resolved_config(prefix: str, config: dict):
    with open(prefix + ".config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _require_file(path: str) -> str:
    if not os.path.exists(path):
        raise UserError(f"file not found: {path}")
    return path


def _read_csv_columns(path: str) -> dict[str, list[str]]:
    with open(_require_file(path), encoding="utf-8") as fh:
        text = fh.read()
    data_lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(data_lines)))
    cols: dict[str, list[str]] = {}
    for row in reader:
        for key, val in row.items():
            cols.setdefault(key, []).append(val)
    return cols


def _read_u_series(path: str) -> np.ndarray:
    cols = _read_csv_columns(path)
    if "u" not in cols:
        raise UserError(f"{path}: expected a 'u' column")
    return np.array([float(x) for x in cols["u"]])


def _read_climate_series(path: str, n: int | None = None) -> np.ndarray:
    cols = _read_csv_columns(path)
    for name in ("C", "c", "climate"):
        if name in cols:
            vals = cols[name]
            break
    else:
        raise UserError(f"{path}: expected a climate column named C, c, or climate")
    out = []
    for v in vals:
        if not (v or "").strip():
            raise UserError(f"{path}: climate series has missing values")
        out.append(float(v))
    arr = np.array(out)
    if n is not None and len(arr) < n:
        raise UserError(f"{path}: climate series too short ({len(arr)} < {n})")
    return arr


def _read_marginal_file(path: str) -> DiscreteMarginal:
    cols = _read_csv_columns(path)
    if "value" not in cols or "prob" not in cols:
        raise UserError(f"{path}: marginal file needs 'value' and 'prob' columns")
    return DiscreteMarginal(np.array([int(v) for v in cols["value"]]),
                            np.array([float(p) for p in cols["prob"]]))


# ---------------------------------------------------------------------------
# model construction from flags
# ---------------------------------------------------------------------------

def _copula_params(family: Family, rho, nu, alpha, slot: str) -> CopulaParams:
    if family is Family.GAUSSIAN:
        if rho is None:
            raise UserError(f"--{slot}rho required for a gaussian slot")
        return CopulaParams(rho=rho)
    if family is Family.STUDENT_T:
        if rho is None or nu is None:
            raise UserError(f"--{slot}rho and --{slot}nu required for a t slot")
        return CopulaParams(rho=rho, nu=nu)
    if family is Family.GUMBEL:
        if alpha is None:
            raise UserError(f"--{slot}alpha required for a gumbel slot")
        return CopulaParams(alpha=alpha)
    return CopulaParams()


def _spec_from_args(args) -> ModelSpec:
    kind = ModelKind.parse(args.model)
    link = None
    if getattr(args, "climate_link", None):
        target = {"mag": "mag-parameter", "ar": "ar-parameter"}[args.climate_target]
        link = ClimateLink(link=args.climate_link, beta0=args.beta0,
                           beta1=args.beta1, target=target)
    try:
        if kind is ModelKind.MAG1:
            fam = Family.parse(args.copula)
            mag_par = (CopulaParams(nu=args.nu) if link and fam is Family.STUDENT_T
                       else CopulaParams() if link
                       else _copula_params(fam, args.rho, args.nu, args.alpha, ""))
            return ModelSpec(kind=kind, mag_family=fam, mag_params=mag_par,
                             climate_link=link)
        if kind is ModelKind.MARKOV:
            fam = Family.parse(args.copula)
            return ModelSpec(kind=kind, ar_family=fam,
                             ar_params=_copula_params(fam, args.rho, args.nu,
                                                      args.alpha, ""))
        mag_fam = Family.parse(args.copula)
        ar_fam = Family.parse(args.ar_copula or args.copula)
        ar_linked = link is not None and link.target == "ar-parameter"
        ar_par = (CopulaParams(nu=args.ar_nu) if ar_linked and ar_fam is Family.STUDENT_T
                  else CopulaParams() if ar_linked
                  else _copula_params(ar_fam, args.ar_rho, args.ar_nu,
                                      args.ar_alpha, "ar-"))
        mag_linked = link is not None and link.target == "mag-parameter"
        mag_par = (CopulaParams(nu=args.nu) if mag_linked and mag_fam is Family.STUDENT_T
                   else CopulaParams() if mag_linked
                   else _copula_params(mag_fam, args.rho, args.nu, args.alpha, ""))
        return ModelSpec(kind=kind, mag_family=mag_fam, mag_params=mag_par,
                         ar_family=ar_fam, ar_params=ar_par, climate_link=link)
    except ValueError as exc:
        raise UserError(str(exc)) from exc


def _add_spec_flags(p: argparse.ArgumentParser, with_start_values=True):
    p.add_argument("--model", required=True,
                   choices=["mag1", "magmar11", "markov", "glm"])
    p.add_argument("--copula", default=None,
                   choices=["gaussian", "t", "gumbel", "independence"])
    p.add_argument("--ar-copula", default=None,
                   choices=["gaussian", "t", "gumbel", "independence"])
    p.add_argument("--rho", type=float, default=0.0 if with_start_values else None)
    p.add_argument("--nu", type=float, default=8.0 if with_start_values else None)
    p.add_argument("--alpha", type=float, default=1.5 if with_start_values else None)
    p.add_argument("--ar-rho", type=float, default=0.0 if with_start_values else None)
    p.add_argument("--ar-nu", type=float, default=8.0 if with_start_values else None)
    p.add_argument("--ar-alpha", type=float, default=1.5 if with_start_values else None)
    p.add_argument("--climate", default=None, help="CSV with a climate column")
    p.add_argument("--climate-link", default=None, choices=["tanh", "one-plus-exp"])
    p.add_argument("--climate-target", default="mag", choices=["mag", "ar"])
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--beta1", type=float, default=0.0)
    p.add_argument("--glm-regressors", default="intercept,lag_log")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args, config):
    panel = ingest_ratings(_require_file(args.ratings),
                           RatingsSchema(k_max=args.k_max))
    rows = ["country,agency,date,rating,previous,downgrade,upgrade"]
    for r in panel.records:
        prev = "" if r.previous is None else r.previous
        rows.append(f"{r.country},{r.agency},{r.event_date.isoformat()},"
                    f"{r.rating},{prev},{int(r.downgrade)},{int(r.upgrade)}")
    _write_output(args.out, "\n".join(rows) + "\n", config)
    _write_output(args.out + ".report.txt", panel.report.to_text() + "\n", config)
    _write_resolved_config(args.out, config)
    return 0


def cmd_aggregate(args, config):
    panel = ingest_ratings(_require_file(args.ratings),
                           RatingsSchema(k_max=args.k_max))
    climate = ingest_climate(_require_file(args.climate)) if args.climate else None
    series = aggregate(panel, climate, min_coverage=args.min_coverage)
    _write_output(args.out, series.to_csv(), config)
    _write_output(args.out + ".report.txt", panel.report.to_text() + "\n", config)
    plots.save_activity_figure(series, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


def cmd_transform(args, config):
    series = ActivitySeries.from_csv(_require_file(args.activity))
    if args.marginal == "empirical":
        marginal = empirical_marginal(series.a)
    else:
        marginal = _read_marginal_file(args.marginal)
    us = mixed_difference(series.a, marginal, seed=args.seed, mode=args.mode)
    body_lines = ["t,a,v,u"]
    for t in range(len(us)):
        body_lines.append(f"{t},{us.a[t]},{_r(us.v[t])},{_r(us.u[t])}")
    marg_txt = " ".join(f"{int(d)}:{_r(p)}" for d, p in
                        zip(marginal.support, marginal.probs))
    header_extra = f"# marginal {marg_txt}\n# mode {args.mode}\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_header_block(config, {"transform": args.seed}))
        fh.write(header_extra)
        fh.write("\n".join(body_lines) + "\n")
    plots.save_transform_figure(us, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


def cmd_simulate(args, config):
    spec = _spec_from_args(args)
    climate = None
    if spec.climate_link is not None:
        if not args.climate:
            raise UserError("climate-linked spec requires --climate")
        climate = _read_climate_series(args.climate, args.burn_in + args.n)
    path = simulate(spec, args.n, burn_in=args.burn_in, seed=args.seed,
                    climate=climate)
    cols = "t,u,w" + (",c" if path.climate is not None else "")
    lines = [cols]
    for t in range(len(path.u)):
        row = f"{t},{_r(path.u[t])},{_r(path.w[t])}"
        if path.climate is not None:
            row += f",{_r(path.climate[t])}"
        lines.append(row)
    _write_output(args.out, "\n".join(lines) + "\n", config,
                  {"simulate": args.seed})
    plots.save_path_figure(path, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


def _fit_config(args) -> FitConfig:
    return FitConfig(n_starts=args.starts)


def cmd_fit(args, config):
    if args.model == "glm":
        if args.climate_link or (args.copula and args.copula != "independence"):
            raise UserError("glm takes no copula or climate-link flags")
        series = ActivitySeries.from_csv(_require_file(args.u_file))
        regs = tuple(s.strip() for s in args.glm_regressors.split(","))
        spec = GlmSpec(regs)
        climate = series.c if spec.needs_climate() else None
        if spec.needs_climate() and np.any(np.isnan(series.c)):
            raise UserError("GLM climate regressors require complete C column")
        res = fit_poisson_glm(series.a, spec, climate=climate).to_fit_result()
        psi = None
    else:
        if not args.copula:
            raise UserError("--copula is required for copula models")
        u = _read_u_series(_require_file(args.u_file))
        template = _spec_from_args(args)
        climate = (_read_climate_series(args.climate, len(u))[:len(u)]
                   if args.climate else None)
        fixed = {}
        for item in args.fix or []:
            name, _, val = item.partition("=")
            if not val:
                raise UserError(f"--fix expects name=value, got {item!r}")
            fixed[name] = float(val)
        if args.adjusted:
            if template.climate_link is not None:
                raise UserError("--adjusted requires a homogeneous model")
            two = fit_adjusted_two_step(u, template, config=_fit_config(args),
                                        seed=args.seed, fixed=fixed or None)
            res, psi = two.stage2, two
        else:
            res = fit(u, template, config=_fit_config(args), climate=climate,
                      fixed=fixed or None,
                      seed_provenance={"fit_seed": args.seed})
            psi = None
    payload = {"fit": res.to_dict()}
    if psi is not None:
        payload["stage1"] = psi.stage1.to_dict()
    _write_json(args.out + ".json", payload, config, {"fit": args.seed})
    _write_output(args.out + ".txt", res.to_text() + "\n", config,
                  {"fit": args.seed})
    _write_resolved_config(args.out, config)
    return 0


def _load_fit_json(path: str) -> dict:
    with open(_require_file(path), encoding="utf-8") as fh:
        return json.load(fh)


_NESTS = {("magmar11", "mag1"), ("magmar11", "markov")}


def _lr_rows(fits: list[tuple[str, dict]]) -> list[str]:
    rows = []
    for name_u, fu in fits:
        for name_r, fr in fits:
            if fu is fr or fu["n_params"] <= fr["n_params"]:
                continue
            kinds = (fu["model_kind"], fr["model_kind"])
            same_kind_nested = (fu["model_kind"] == fr["model_kind"]
                                and set(fr["estimates"]) <= set(fu["estimates"]))
            if kinds not in _NESTS and not same_kind_nested:
                continue
            if fu["loglik"] < fr["loglik"] - 1e-6:
                continue
            df = fu["n_params"] - fr["n_params"]
            stat, p = lr_test(fu["loglik"], fr["loglik"], df)
            rows.append(f"LR {name_u} vs {name_r}: stat={stat:.4f} df={df} p={p:.5f}")
    return rows


def cmd_compare(args, config):
    fits = []
    for path in args.fits:
        doc = _load_fit_json(path)
        name = os.path.splitext(os.path.basename(path))[0]
        fits.append((name, doc["fit"]))
    u = _read_u_series(args.u_file) if args.u_file else None
    series = ActivitySeries.from_csv(args.activity) if args.activity else None
    rows = []
    for name, f in fits:
        rolling = None
        if args.oos is not None:
            cfg = FitConfig(n_starts=max(1, args.starts))
            try:
                if f["model_kind"] == "poisson_glm":
                    if series is None:
                        raise UserError(
                            "--activity is required for GLM out-of-sample scores")
                    regs = tuple(f["estimates"].keys())
                    clim = series.c if GlmSpec(regs).needs_climate() else None
                    rolling = rolling_log_score(series.a, GlmSpec(regs),
                                                min_window=args.oos, config=cfg,
                                                climate=clim)
                else:
                    if u is None:
                        raise UserError("--u-file is required for copula "
                                        "out-of-sample scores")
                    rolling = rolling_log_score(u, spec_from_dict(f["spec"]),
                                                min_window=args.oos, config=cfg)
            except ValueError as exc:
                raise UserError(str(exc)) from exc
        family = (f["spec"]["mag_family"] if f.get("spec") and
                  f["model_kind"] != "markov"
                  else f["spec"]["ar_family"] if f.get("spec")
                  else "poisson")
        rows.append(ComparisonRow.from_fit(name, family,
                                           _fitresult_from_dict(f), rolling))
    text = comparison_text(rows)
    lr_lines = _lr_rows(fits)
    if lr_lines:
        text += "\n".join(lr_lines) + "\n"
    _write_output(args.out + ".csv", comparison_csv(rows), config)
    _write_output(args.out + ".txt", text, config)
    plots.save_comparison_figure(rows, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


def _fitresult_from_dict(f: dict) -> FitResult:
    return FitResult(
        model_kind=f["model_kind"], estimates=f["estimates"],
        std_errors=f.get("std_errors"), loglik=f["loglik"],
        contributions=np.array([]), aic=f["aic"], bic=f["bic"],
        n_obs=f["n_obs"], n_params=f["n_params"], converged=f["converged"],
        boundary_hits=f.get("boundary_hits", {}), multistart=[],
    )


def cmd_forecast(args, config):
    u = _read_u_series(_require_file(args.u_file))
    template = _spec_from_args(args)
    climate = (_read_climate_series(args.climate, len(u))[:len(u)]
               if args.climate else None)
    rolling = rolling_log_score(u, template, min_window=args.min_window,
                                refit_every=args.refit_every,
                                config=_fit_config(args), climate=climate)
    lines = ["origin,score,flag"]
    for t, s in zip(rolling.origins, rolling.scores):
        lines.append(f"{t},{_r(s)},")
    for t in rolling.unbounded_origins:
        lines.append(f"{t},,unbounded")
    for t in rolling.failed_origins:
        lines.append(f"{t},,failed")
    lines.append(f"average,{_r(rolling.average)},"
                 f"retained={len(rolling.scores)}")
    _write_output(args.out + ".csv", "\n".join(lines) + "\n", config)
    plots.save_rolling_figure(rolling, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


def cmd_risk(args, config):
    doc = _load_fit_json(args.fit)
    f = doc["fit"]
    if f.get("spec") is None:
        raise UserError("risk requires a copula-model fit report")
    spec = spec_from_dict(f["spec"])
    if args.alpha * args.paths < 10:
        raise UserError("alpha * paths < 10: too few tail observations")
    marginal_inverse = None
    if args.marginal_inverse:
        cols = _read_csv_columns(args.marginal_inverse)
        if "p" not in cols or "x" not in cols:
            raise UserError("marginal-inverse file needs 'p' and 'x' columns")
        grid_p = np.array([float(v) for v in cols["p"]])
        grid_x = np.array([float(v) for v in cols["x"]])
        marginal_inverse = lambda q: np.interp(q, grid_p, grid_x)  # noqa: E731
    state = RiskState(w=args.state_w, u=args.state_u)
    report = plug_in_risk(spec, state, marginal_inverse, horizon=args.horizon,
                          alpha=args.alpha, n_paths=args.paths, seed=args.seed)
    _write_json(args.out + ".json", {"risk": report.to_dict()}, config,
                {"risk": args.seed})
    _write_output(args.out + ".txt", report.to_text() + "\n", config,
                  {"risk": args.seed})
    samples = simulate_conditional_paths(spec, state, args.horizon, args.paths,
                                         args.seed)
    if marginal_inverse is not None:
        samples = marginal_inverse(samples)
    plots.save_risk_figure(samples, report, args.out + ".png")
    _write_resolved_config(args.out, config)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magmar")
    parser.add_argument("--config", default=None,
                        help="JSON config; flags override file values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and clean the ratings panel")
    p.add_argument("--ratings", required=True)
    p.add_argument("--k-max", type=int, default=22)
    p.add_argument("--out", required=True)

    p = sub.add_parser("aggregate", help="build the annual activity series")
    p.add_argument("--ratings", required=True)
    p.add_argument("--climate", default=None)
    p.add_argument("--k-max", type=int, default=22)
    p.add_argument("--min-coverage", type=float, default=0.3)
    p.add_argument("--out", required=True)

    p = sub.add_parser("transform", help="mixed-difference transform of counts")
    p.add_argument("--activity", required=True)
    p.add_argument("--marginal", default="empirical",
                   help="'empirical' or a marginal CSV (value,prob)")
    p.add_argument("--mode", default="randomized", choices=["randomized", "mid"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="simulate a model path")
    _add_spec_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    p.add_argument("--u-file", required=True,
                   help="transformed series CSV (activity CSV for --model glm)")
    _add_spec_flags(p)
    p.add_argument("--adjusted", action="store_true",
                   help="adjusted two-step estimator")
    p.add_argument("--fix", action="append", default=[],
                   help="freeze a parameter, e.g. --fix beta1=0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="comparison table from fit reports")
    p.add_argument("--fits", nargs="+", required=True)
    p.add_argument("--u-file", default=None)
    p.add_argument("--activity", default=None)
    p.add_argument("--oos", type=int, default=None,
                   help="min window for rolling out-of-sample scores")
    p.add_argument("--starts", type=int, default=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("forecast", help="rolling one-step-ahead log-scores")
    p.add_argument("--u-file", required=True)
    _add_spec_flags(p)
    p.add_argument("--min-window", type=int, required=True)
    p.add_argument("--refit-every", type=int, default=1)
    p.add_argument("--starts", type=int, default=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("risk", help="Monte-Carlo plug-in VaR and ES")
    p.add_argument("--fit", required=True)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state-w", type=float, default=0.5)
    p.add_argument("--state-u", type=float, default=0.5)
    p.add_argument("--marginal-inverse", default=None,
                   help="CSV (p,x) defining a monotone quantile map")
    p.add_argument("--out", required=True)

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "aggregate": cmd_aggregate,
    "transform": cmd_transform,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "forecast": cmd_forecast,
    "risk": cmd_risk,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    # merge config-file values as defaults, with explicit flags overriding
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre_args, _ = pre.parse_known_args(argv)
    if pre_args.config:
        try:
            with open(pre_args.config, encoding="utf-8") as fh:
                file_config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {pre_args.config}: {exc}",
                  file=sys.stderr)
            return 2
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in file_config.items()
                                   if k in known})
    args = parser.parse_args(argv)
    config = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    config["command"] = args.command
    try:
        return _COMMANDS[args.command](args, config)
    except (UserError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
