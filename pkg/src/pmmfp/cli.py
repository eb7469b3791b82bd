"""Command-line interface: ``pmmfp fit | bootstrap | simulate``.

Exit codes: 0 success, 1 hard failure, 2 usage or configuration error,
3 completed but with degraded or instability warnings.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .basis import EnumerationMode, FpBlock, Track, build_design
from .bootstrap import MIN_REPLICATES, ResamplingUnit, bootstrap_fixed_model
from .bootstrap import bootstrap_selection_stability
from .errors import (
    ColumnMissing,
    FpError,
    InvalidConfig,
    NonPositiveCovariate,
    UnknownExperiment,
)
from .estimators import Estimator, FitResult, SolverConfig, fit
from .formb import correlant_report, default_basis, kunchenko_b2
from .laws import ErrorLaw
from .report import ReportEnvelope
from .selection import (
    SingleBestRule,
    _prepare_x,
    fma,
    prediction_estimand,
    report_single_best_rule,
    sweep,
)
from .simulation import (
    FMA_LAWS,
    MATCHED_LAWS,
    PROFILES,
    SYMMETRIC_LAWS,
    McDesign,
    capture_timings,
    fma_csv,
    matched_basis_csv,
    run_fma_experiment,
    run_matched_basis_experiment,
    run_symmetric_degradation_experiment,
    symmetric_csv,
    timings_csv,
)
from .streams import default_threads

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("pmmfp")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_WARNINGS = 0, 1, 2, 3
MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "none"}
DEFAULT_SEED = 20240601
EXPERIMENTS = ("matched_basis", "fma", "symmetric", "timings")


# ---------------------------------------------------------------- data input

def load_columns(path: Path, columns: list[str]) -> tuple[dict[str, np.ndarray], int]:
    """Read the named numeric columns, keeping complete cases only.

    Returns the arrays and the number of dropped rows.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path} is empty")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise ColumnMissing(f"column(s) not found in {path}: {', '.join(missing)}")
        rows, dropped = [], 0
        for lineno, rec in enumerate(reader, start=2):
            cells = [(rec.get(c) or "").strip() for c in columns]
            if any(v.lower() in MISSING_TOKENS for v in cells):
                dropped += 1
                continue
            try:
                rows.append([float(v) for v in cells])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {columns}") from None
    if not rows:
        raise ValueError(f"{path} has no complete rows for {columns}")
    arr = np.array(rows)
    return {c: arr[:, j] for j, c in enumerate(columns)}, dropped


def _parse_shift(text: str | None):
    if text is None or text.lower() == "none":
        return None
    if text.lower() == "auto":
        return "auto"
    return float(text)


def _parse_block(text: str) -> FpBlock:
    return FpBlock.parse(text)


class ModelData:
    def __init__(self, args):
        path = Path(args.csv)
        if not path.is_file():
            raise FileNotFoundError(f"input CSV not found: {path}")
        self.covariate_names = [c.strip() for c in (args.covariates or "").split(",") if c.strip()]
        cols = list(dict.fromkeys([args.response, args.x, *self.covariate_names]))
        data, self.n_dropped = load_columns(path, cols)
        y = data[args.response]
        if args.response_transform == "log":
            if np.any(y <= 0):
                raise ValueError("log response transform needs a positive response")
            y = np.log(y)
        self.y = y
        self.x_raw = data[args.x]
        self.x_name = args.x
        self.shift = _parse_shift(args.shift)
        if self.shift is None and np.any(self.x_raw <= 0):
            raise NonPositiveCovariate(
                f"column {args.x!r} has values <= 0; rerun with --shift auto or --shift VALUE")
        self.x, self.offset = _prepare_x(self.x_raw, self.shift)
        self.Z = (np.column_stack([data[c] for c in self.covariate_names])
                  if self.covariate_names else None)

    @property
    def n(self) -> int:
        return self.y.size

    def design(self, block: FpBlock):
        return build_design(self.x, block, self.Z, offset=self.offset,
                            covariate_labels=self.covariate_names or None, x_name=self.x_name)


def _model_arguments(p: argparse.ArgumentParser):
    p.add_argument("csv", help="input CSV with a header row")
    p.add_argument("--response", required=True, help="response column")
    p.add_argument("--x", required=True, help="FP covariate column")
    p.add_argument("--covariates", default="", help="comma-separated linear covariates")
    p.add_argument("--shift", default=None,
                   help="domain shift for x: 'auto' or a number (default: none, x must be > 0)")
    p.add_argument("--response-transform", choices=("none", "log"), default="none")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--csv-dir", help="directory for CSV tables")


# ---------------------------------------------------------------- reporting

def _fit_warnings(env: ReportEnvelope, f: FitResult):
    tag = f"{f.estimator.value}{f.block.label}"
    if f.cumulants.degraded:
        env.warn("degraded_cumulants", f"{tag}: g2 hit its floor; PMM2 gain is unreliable")
    if f.cumulants.degenerate:
        env.warn("degenerate_cumulants", f"{tag}: residual cumulants undefined; PMM2 reverted to OLS")
    if not f.converged:
        env.warn("not_converged", f"{tag}: iteration limit reached")
    for flag in f.flags:
        if flag.startswith("fisher_fallback"):
            env.warn("fisher_fallback", f"{tag}: {flag}")


def skew_summary(f: FitResult) -> dict:
    """Skewness z-score against its normal-theory SE, with a symmetry flag."""
    n = f.n
    g3, g4 = f.cumulants.gamma3, f.cumulants.gamma4
    z3 = g3 / math.sqrt(6.0 / n)
    z4 = g4 / math.sqrt(24.0 / n)
    return {"gamma3": g3, "gamma4": g4, "z_skewness": z3, "z_kurtosis": z4,
            "approximately_symmetric": bool(abs(z3) < 1.96),
            "approximately_normal": bool(abs(z3) < 1.96 and abs(z4) < 1.96)}


def _coef_rows(fits: list[FitResult]) -> list[dict]:
    rows = []
    ols = next((f for f in fits if f.estimator is Estimator.OLS), None)
    for f in fits:
        for j, lab in enumerate(f.column_labels):
            row = {"estimator": f.estimator.value, "block": f.block.label, "term": lab,
                   "beta": float(f.beta[j]), "se_asymptotic": float(f.se_asymptotic[j])}
            if ols is not None and f.estimator is Estimator.PMM and ols.block == f.block:
                row["se_ratio_vs_ols"] = float(f.se_asymptotic[j] / ols.se_asymptotic[j])
            rows.append(row)
    return rows


def _print_coef_table(rows: list[dict], out):
    print(f"{'estimator':<9} {'term':<22} {'beta':>13} {'se':>12} {'se/ols':>8}", file=out)
    for r in rows:
        ratio = r.get("se_ratio_vs_ols")
        ratio_s = f"{ratio:8.3f}" if ratio is not None else f"{'':>8}"
        print(f"{r['estimator']:<9} {r['term']:<22} {r['beta']:13.6g} {r['se_asymptotic']:12.4g} "
              f"{ratio_s}", file=out)


def _formb_section(env: ReportEnvelope, residuals) -> dict:
    out = {}
    for name, basis in (("B2", kunchenko_b2()), ("track_a", default_basis(Track.POSITIVE)),
                        ("track_b", default_basis(Track.FULL))):
        try:
            rep = correlant_report(residuals, basis)
        except FpError as exc:
            env.warn("formb_failed", f"Form-B {name}: {type(exc).__name__}: {exc}")
            out[name] = None
            continue
        out[name] = rep.to_dict()
        if not rep.stable:
            env.warn("formb_unstable", f"Form-B {name}: unstable (kappa={rep.spectral.condition_number:.3g})")
        if rep.bd0 is not None and not rep.bd0.admissible:
            env.warn("bd0_inadmissible", f"Form-B {name}: inverse-moment condition fails")
    return out


def _write_outputs(env: ReportEnvelope, out_json: str | None, tables: dict[str, str],
                   csv_dir: str | None):
    if out_json:
        Path(out_json).write_text(env.to_json(), encoding="utf-8")
    if csv_dir:
        d = Path(csv_dir)
        for name, text in tables.items():
            (d / name).write_text(text, encoding="utf-8")


def _check_output_paths(out_json: str | None, out_dir: str | None):
    if out_json:
        parent = Path(out_json).resolve().parent
        if not parent.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {parent}")
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)


def _rows_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def _estimators(text: str) -> list[Estimator]:
    if text == "both":
        return [Estimator.OLS, Estimator.PMM]
    return [Estimator.parse(t) for t in text.split(",")]


def cmd_fit(args, out=sys.stdout) -> ReportEnvelope:
    _check_output_paths(args.out, args.csv_dir)
    data = ModelData(args)
    config = SolverConfig()
    env = ReportEnvelope(payload={}, seed=args.seed, config=_echo(args))
    if data.n_dropped:
        env.warn("incomplete_rows", f"{data.n_dropped} incomplete row(s) dropped", "info")
    ests = _estimators(args.estimator)
    tables: dict[str, str] = {}
    payload: dict = {"n": data.n, "n_dropped": data.n_dropped, "x_offset": data.offset,
                     "response_transform": args.response_transform}
    if args.powers == "auto":
        main_est = Estimator.PMM if Estimator.PMM in ests else ests[0]
        sel = sweep(data.x_raw, data.y, data.Z, args.track, args.mode, main_est, config,
                    max_terms=args.max_terms, offset=data.shift,
                    covariate_labels=data.covariate_names or None, x_name=data.x_name)
        for b, reason in sel.failures:
            env.warn("candidate_failed", f"{b}: {reason}", "info")
        rule = report_single_best_rule(sel) if len(sel.candidates) > 1 else SingleBestRule.SINGLE_BEST_OK
        block = sel.candidates[sel.best].block
        payload.update(kind="selection", selection=sel.to_dict(), rule=rule.value)
        tables["selection.csv"] = _rows_csv(sel.to_dict()["candidates"])
        print(f"best block {block.label} (dBIC to runner-up {sel.delta_bic_runner_up:.2f}): "
              f"{rule.value}", file=out)
        if rule is SingleBestRule.RECOMMEND_FMA:
            x_star = args.x_star if args.x_star is not None else float(np.median(data.x_raw))
            z_star = None if data.Z is None else np.median(data.Z, axis=0)
            top_j = min(args.top_j, len(sel.candidates))
            res = fma(sel, prediction_estimand(x_star, z_star), top_j)
            payload["fma"] = {"x_star": x_star, "covariates_at": None if z_star is None
                              else list(z_star), **res.to_dict()}
            print(f"FMA top-{top_j} mu({x_star:g}) = {res.theta_fma:.6g} "
                  f"[{res.ci95[0]:.6g}, {res.ci95[1]:.6g}]", file=out)
    else:
        block = _parse_block(args.powers)
        payload["kind"] = "fit"
    D = data.design(block)
    fits = [fit(D, data.y, e, config) for e in ests]
    for f in fits:
        _fit_warnings(env, f)
    rows = _coef_rows(fits)
    payload["fits"] = [f.to_dict() for f in fits]
    payload["coefficients"] = rows
    ref = fits[0]
    summary = skew_summary(ref)
    payload["residual_shape"] = summary
    tables["coefficients.csv"] = _rows_csv(rows)
    _print_coef_table(rows, out)
    print(f"residual gamma3={ref.cumulants.gamma3:.4g} gamma4={ref.cumulants.gamma4:.4g} "
          f"g2={ref.g2:.4g}", file=out)
    if summary["approximately_symmetric"]:
        env.warn("symmetric_residuals",
                 f"residual skewness is not significant (g2={ref.g2:.3f}); PMM2 is close to OLS",
                 "info")
        print("residuals look symmetric: g2 is close to 1 and PMM2 essentially equals OLS", file=out)
    if args.diagnose_formb:
        ols_resid = fit(D, data.y, Estimator.OLS, config).residuals
        payload["formb"] = _formb_section(env, ols_resid)
        for name, rep in payload["formb"].items():
            if rep is not None:
                k = rep["spectral"]["condition_number"]
                print(f"Form-B {name}: g_hat={rep['g_hat']:.4g} kappa="
                      f"{'inf' if k is None else f'{k:.3g}'} stable={rep['stable']}", file=out)
    env.payload = payload
    _write_outputs(env, args.out, tables, args.csv_dir)
    return env


def cmd_bootstrap(args, out=sys.stdout) -> ReportEnvelope:
    if args.B < MIN_REPLICATES:
        raise InvalidConfig(f"-B must be at least {MIN_REPLICATES}")
    _check_output_paths(args.out, args.csv_dir)
    data = ModelData(args)
    block = _parse_block(args.powers)
    threads = args.threads or default_threads()
    env = ReportEnvelope(payload={}, seed=args.seed, config=_echo(args))
    if data.n_dropped:
        env.warn("incomplete_rows", f"{data.n_dropped} incomplete row(s) dropped", "info")
    ests = _estimators(args.estimators)
    res = bootstrap_fixed_model(data.x_raw, data.y, data.Z, block, ests, args.B, args.seed,
                                threads=threads, offset=data.shift, unit=args.unit,
                                covariate_labels=data.covariate_names or None,
                                x_name=data.x_name)
    if res.n_failed:
        env.warn("failed_replicates", f"{res.n_failed} of {res.B} replicates failed")
    plug_in = fit(data.design(block), data.y, Estimator.OLS).g2
    payload = {"kind": "bootstrap", "n": data.n, "n_dropped": data.n_dropped,
               "g2_plug_in": plug_in, "bootstrap": res.to_dict()}
    tables = {"bootstrap.csv": res.to_csv()}
    _print_coef_table([{"estimator": r["estimator"], "term": r["term"], "beta": r["beta"],
                        "se_asymptotic": r["se_boot"]} for r in res.to_dict()["coefficients"]], out)
    if res.variance_ratio is not None:
        ratios = ", ".join(f"{k}={v:.4f}" for k, v in zip(res.column_labels, res.variance_ratio))
        print(f"bootstrap variance ratio PMM/OLS: {ratios}; plug-in g2={plug_in:.4f}", file=out)
    if args.selection_stability:
        table = bootstrap_selection_stability(data.x_raw, data.y, data.Z, args.track, args.mode,
                                              args.B, args.seed, max_terms=args.max_terms,
                                              threads=threads, offset=data.shift)
        payload["selection_stability"] = table.to_dict()
        tables["selection_frequency.csv"] = table.to_csv()
        for b, c, fr in table.top(5):
            print(f"{b:<16} {c:6d} {fr:7.3f}", file=out)
    env.payload = payload
    _write_outputs(env, args.out, tables, args.csv_dir)
    return env


# ---------------------------------------------------------------- simulate

_DESIGN_KEYS = {"seed", "laws", "true_block", "true_beta", "x_range", "x_star"}
_ALLOWED = {
    "matched_basis": _DESIGN_KEYS | {"M", "n_grid"},
    "fma": _DESIGN_KEYS | {"M", "n_grid", "top_j", "max_terms", "track"},
    "symmetric": _DESIGN_KEYS | {"M", "n", "huber_laws"},
    "timings": {"seed", "law", "n_values", "repeats", "warmup", "block", "estimators"},
}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_DEFAULT_LAWS = {"matched_basis": MATCHED_LAWS, "fma": FMA_LAWS, "symmetric": SYMMETRIC_LAWS}


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def resolve_config(experiment: str, profile: str, config_path: str | None,
                   overrides: list[str]) -> tuple[dict, dict]:
    """Merge profile defaults, the TOML file and ``--set`` overrides.

    Returns ``(experiment_options, solver_options)``. Unknown tables or keys
    raise ``InvalidConfig``.
    """
    if experiment not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    if profile not in PROFILES:
        raise InvalidConfig(f"unknown profile {profile!r}")
    opts = dict(PROFILES[profile][experiment])
    solver: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            doc = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from None
        bad = set(doc) - set(EXPERIMENTS) - {"solver"}
        if bad:
            raise InvalidConfig(f"unknown config table(s): {sorted(bad)}")
        for table in [experiment, "solver"]:
            if table in doc and not isinstance(doc[table], dict):
                raise InvalidConfig(f"[{table}] must be a table")
        opts.update(doc.get(experiment, {}))
        solver.update(doc.get("solver", {}))
    for item in overrides:
        if "=" not in item:
            raise InvalidConfig(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key.startswith("solver."):
            solver[key[len("solver."):]] = _parse_value(value)
        else:
            opts[key] = _parse_value(value)
    unknown = set(opts) - _ALLOWED[experiment]
    if unknown:
        raise InvalidConfig(f"unknown key(s) for {experiment}: {sorted(unknown)}")
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        raise InvalidConfig(f"unknown solver key(s): {sorted(unknown)}")
    return opts, solver


def _design(opts: dict, law) -> McDesign:
    kw = {k: opts[k] for k in ("true_block", "true_beta", "x_range", "x_star", "seed", "M")
          if k in opts}
    if "n_grid" in opts:
        kw["n_grid"] = tuple(opts["n_grid"])
    return McDesign(law=ErrorLaw.parse(law), **kw)


def run_experiment(experiment: str, opts: dict, solver: SolverConfig, threads: int,
                   env: ReportEnvelope) -> tuple[dict, dict[str, str]]:
    laws = opts.get("laws", _DEFAULT_LAWS.get(experiment, ()))
    if isinstance(laws, str):
        laws = [laws]
    if experiment == "matched_basis":
        cells = []
        for law in laws:
            cells.extend(run_matched_basis_experiment(_design(opts, law), config=solver,
                                                      threads=threads))
        for c in cells:
            if c.n_failed:
                env.warn("failed_replicates", f"{c.law} n={c.n}: {c.n_failed} replicate(s) failed")
        return ({"kind": experiment, "cells": [c.to_dict() for c in cells]},
                {"matched_basis.csv": matched_basis_csv(cells)})
    if experiment == "fma":
        cells = []
        for law in laws:
            cells.extend(run_fma_experiment(_design(opts, law), opts.get("top_j", (3, 5)),
                                            track=opts.get("track", "a"),
                                            max_terms=opts.get("max_terms", 2), config=solver,
                                            threads=threads))
        for law, n, failed in sorted({(c.law, c.n, c.n_failed) for c in cells if c.n_failed}):
            env.warn("failed_replicates", f"{law} n={n}: {failed} replicate(s) failed")
        return {"kind": experiment, "cells": [c.to_dict() for c in cells]}, {"fma.csv": fma_csv(cells)}
    if experiment == "symmetric":
        base = _design({k: v for k, v in opts.items() if k != "M"} | {"M": 50}, "gaussian")
        rows = run_symmetric_degradation_experiment(
            laws, n=opts.get("n", 200), M=opts.get("M", 2000), seed=opts.get("seed", base.seed),
            huber_laws=opts.get("huber_laws", ("laplace(1)",)), base=base, config=solver,
            threads=threads)
        return ({"kind": experiment, "cells": [r.to_dict() for r in rows]},
                {"symmetric.csv": symmetric_csv(rows)})
    design = McDesign(law=ErrorLaw.parse(opts.get("law", "gamma(3)")),
                      seed=opts.get("seed", DEFAULT_SEED))
    summary = capture_timings(design, opts.get("n_values", (100, 1000)),
                              opts.get("estimators", ("ols", "pmm")), opts.get("repeats", 200),
                              opts.get("warmup", 10), opts.get("block"), solver)
    return {"kind": experiment, **summary.to_dict()}, {"timings.csv": timings_csv(summary)}


def cmd_simulate(args, out=sys.stdout) -> ReportEnvelope:
    opts, solver_opts = resolve_config(args.experiment, args.profile, args.config, args.set or [])
    if args.seed is not None:
        opts["seed"] = args.seed
    try:
        solver = SolverConfig(**solver_opts)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"solver: {exc}") from None
    _check_output_paths(None, args.out_dir)
    threads = args.threads or default_threads()
    env = ReportEnvelope(payload={}, seed=opts.get("seed", DEFAULT_SEED),
                         config={"experiment": args.experiment, "profile": args.profile,
                                 "options": opts, "solver": solver_opts})
    try:
        payload, tables = run_experiment(args.experiment, opts, solver, threads, env)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FpError):
            raise
        raise InvalidConfig(str(exc)) from exc
    env.payload = payload
    for text in tables.values():
        out.write(text)
    if args.out_dir:
        d = Path(args.out_dir)
        _write_outputs(env, str(d / f"{args.experiment}.json"), tables, str(d))
    return env


def _echo(args) -> dict:
    skip = {"func", "handler"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmmfp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pmmfp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a fixed FP block or run a BIC sweep")
    _model_arguments(f)
    f.add_argument("--powers", default="auto", help="block such as '{1}' or '0.5,2', or 'auto'")
    f.add_argument("--estimator", default="both", help="ols, pmm, huber, a comma list or 'both'")
    f.add_argument("--track", type=Track.parse, default=Track.POSITIVE, help="a (positive) or b (full)")
    f.add_argument("--mode", type=EnumerationMode.parse, default=EnumerationMode.SUBSETS,
                   help="subsets or ra2")
    f.add_argument("--max-terms", type=int, default=4)
    f.add_argument("--top-j", type=int, default=5)
    f.add_argument("--x-star", type=float, default=None, help="prediction point for FMA")
    f.add_argument("--diagnose-formb", action="store_true")
    f.set_defaults(handler=cmd_fit)

    b = sub.add_parser("bootstrap", help="pairs bootstrap of a fixed FP block")
    _model_arguments(b)
    b.add_argument("--powers", required=True)
    b.add_argument("-B", type=int, default=2000)
    b.add_argument("--estimators", default="both")
    b.add_argument("--unit", choices=[u.value for u in ResamplingUnit], default="pairs")
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--selection-stability", action="store_true")
    b.add_argument("--track", type=Track.parse, default=Track.POSITIVE)
    b.add_argument("--mode", type=EnumerationMode.parse, default=EnumerationMode.SUBSETS)
    b.add_argument("--max-terms", type=int, default=4)
    b.set_defaults(handler=cmd_bootstrap)

    s = sub.add_parser("simulate", help="run a named Monte Carlo experiment")
    s.add_argument("experiment", help="matched_basis, fma, symmetric or timings")
    s.add_argument("--config", help="TOML file with [<experiment>] and [solver] tables")
    s.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one option; use solver.KEY for solver settings")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out-dir", help="directory for <experiment>.json and CSV tables")
    s.set_defaults(handler=cmd_simulate)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        env = args.handler(args, out)
    except (UnknownExperiment, InvalidConfig) as exc:
        print(f"pmmfp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FpError, FileNotFoundError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"pmmfp: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    for w in env.warnings:
        if w.severity != "info":
            print(f"pmmfp: warning [{w.code}]: {w.message}", file=sys.stderr)
    return EXIT_WARNINGS if env.has_warnings else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
