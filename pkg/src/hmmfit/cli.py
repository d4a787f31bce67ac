"""Command-line interface: fit, select, ci, profile, bootstrap, coverage,
bench, decode, forecast and simulate subcommands.

Output formats: `text` (aligned tables), `json` (one document with the
schema {command, config, results, warnings, seed}) and `csv` (fixed header
per subcommand).  Every subcommand taking --seed produces identical bytes
for identical invocations; bench is the one exception, since its wall-clock
fields measure real time (its iteration statistics are still deterministic).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from ._parallel import resolve_threads
from .confint import (
    CIMethod,
    CIStatus,
    IntervalRow,
    IntervalTable,
    bootstrap_ci,
    coverage_study,
    profile_ci,
    profile_table,
    wald_ci,
)
from .data import load_dataset
from .errors import HmmError
from .inference import forecast as forecast_pmf
from .inference import infer_states
from .likelihood import InitialDist
from .model import (
    FitResult,
    ParameterMap,
    fit,
    make_objective,
    model_select,
    sd_report,
)
from .optimize import Mode, OptimizerConfig
from .params import NaturalParams, natural_to_working
from .simulate import PRESETS, bench, simulate_hmm


class CliError(Exception):
    """Validation failure; rendered as a machine-readable error on stderr."""


def _add_common(p: argparse.ArgumentParser, data: bool = True, seed: bool = False):
    if data:
        p.add_argument("--data", required=True,
                       help="dataset: 'tyt', '-' for stdin, or a file path")
        p.add_argument("--states", "-m", type=int, required=True, help="state count")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    if seed:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: HMMFIT_THREADS or 1)")


def _fit_options(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.GRAD_HESS.value,
                   help="optimizer derivative configuration")
    p.add_argument("--init-dist", choices=("stationary", "estimated"), default="stationary")
    p.add_argument("--init-from", default=None,
                   help="JSON output of a previous fit to use as starting values")
    p.add_argument("--fix", default=None,
                   help="comma-separated working parameters to fix at their "
                        "starting values, e.g. 'eta1' or 'eta1,tau21'")
    p.add_argument("--max-iter", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmmfit",
        description="Poisson hidden Markov models: maximum likelihood with exact "
                    "derivatives, confidence intervals and state inference.")
    parser.add_argument("--version", action="version", version=f"hmmfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate a model, print estimates and SEs")
    _add_common(p)
    _fit_options(p)

    p = sub.add_parser("select", help="fit a range of state counts, tabulate AIC/BIC")
    p.add_argument("--data", required=True)
    p.add_argument("--states", required=True,
                   help="state counts, e.g. '1,2,3,4' or '1:4'")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("ci", help="confidence intervals by the selected methods")
    _add_common(p, seed=True)
    _fit_options(p)
    p.add_argument("--methods", default="wald",
                   help="comma-separated subset of wald,profile,bootstrap")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("-B", "--replicates", type=int, default=200,
                   help="bootstrap replicate count")
    p.add_argument("--clip", action="store_true",
                   help="clip displayed probability bounds to [0, 1]")

    p = sub.add_parser("profile", help="profile-likelihood trace for one parameter")
    _add_common(p)
    _fit_options(p)
    p.add_argument("--param", required=True,
                   help="working parameter name (eta2, tau21, ...) or free index")
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("bootstrap", help="parametric bootstrap intervals + archive")
    _add_common(p, seed=True)
    _fit_options(p)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("-B", "--replicates", type=int, default=200)
    p.add_argument("--archive", default=None,
                   help="write per-replicate estimates to this CSV")

    p = sub.add_parser("coverage", help="Monte-Carlo coverage study")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--truth-from", default=None,
                   help="JSON fit output to use as the generating model")
    p.add_argument("--length", "-T", type=int, required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--methods", default="wald,bootstrap")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("-B", "--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("bench", help="time the optimizer modes on resampled data")
    _add_common(p, seed=True)
    p.add_argument("--modes", default=",".join(m.value for m in Mode))
    p.add_argument("--reps", type=int, default=50)

    p = sub.add_parser("decode", help="smoothing probabilities and decoded paths")
    _add_common(p)
    _fit_options(p)

    p = sub.add_parser("forecast", help="h-step-ahead forecast distribution")
    _add_common(p)
    _fit_options(p)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--max-x", type=int, default=None)

    p = sub.add_parser("simulate", help="write a simulated dataset (counts, one per line)")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--params-from", default=None,
                   help="JSON fit output providing the generating model")
    p.add_argument("--length", "-T", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default=None)
    p.add_argument("--states-out", default=None,
                   help="also write the true state path here (one per line)")
    return parser


# -- shared helpers -------------------------------------------------------------


def _working_start(args, x, m):
    """Starting values from --init-from JSON, or the quantile defaults."""
    if args.init_from:
        with open(args.init_from) as fh:
            doc = json.load(fh)
        results = doc.get("results", doc)
        est = results.get("estimates", results)
        lam = np.array([est[f"lambda{i+1}"]["estimate"] if isinstance(est[f"lambda{i+1}"], dict)
                        else est[f"lambda{i+1}"] for i in range(m)])
        gamma = np.empty((m, m))
        for i in range(m):
            for j in range(m):
                cell = est[f"gamma{i+1}{j+1}"]
                gamma[i, j] = cell["estimate"] if isinstance(cell, dict) else cell
        return natural_to_working(NaturalParams(m, lam, gamma))
    return None


def _parse_map(args, x, m, init):
    if not getattr(args, "fix", None):
        return None
    from .params import working_names

    names = working_names(m, init is InitialDist.ESTIMATED)
    fixed = []
    for token in args.fix.split(","):
        token = token.strip()
        if token not in names:
            raise CliError(f"unknown working parameter {token!r}; valid: {names}")
        fixed.append(names.index(token))
    return ParameterMap.fixing(len(names), fixed)


def _fit_from_args(args) -> FitResult:
    x = load_dataset(args.data)
    m = args.states
    if m < 1:
        raise CliError("--states must be >= 1")
    init = InitialDist(args.init_dist) if hasattr(args, "init_dist") else InitialDist.STATIONARY
    w0 = _working_start(args, x, m)
    pmap = _parse_map(args, x, m, init)
    obj = make_objective(x, m, w0=w0, pmap=pmap, init=init)
    cfg = OptimizerConfig(mode=Mode(args.mode), max_iter=args.max_iter)
    return fit(obj, cfg)


def _fit_results_dict(result: FitResult) -> dict:
    rep = sd_report(result)
    estimates = {
        name: {"estimate": float(est), "std_error": float(se)}
        for name, est, se in rep.rows()
    }
    return {
        "m": result.m,
        "nll": result.nll,
        "aic": result.aic,
        "bic": result.bic,
        "k": result.k,
        "converged": result.converged,
        "iterations": result.report.iterations,
        "termination": result.report.termination.value,
        "estimates": estimates,
        "working": {name: float(v) for name, v in
                    zip(result.objective.working_names(), result.w_full)},
    }


def _interval_rows(table: IntervalTable) -> list[dict]:
    return [
        {
            "name": row.name,
            "estimate": row.estimate,
            "lower": row.lower,
            "upper": row.upper,
            "method": row.method.value,
            "level": row.level,
            "status": row.status.value,
        }
        for row in table
    ]


def _emit(args, command: str, results: dict, csv_rows: tuple[list[str], list[list]] | None,
          warnings: list[str], seed=None) -> None:
    fmt = getattr(args, "format", "text")
    if fmt == "json":
        config = {k: v for k, v in sorted(vars(args).items())
                  if k not in ("command", "format", "output") and v is not None}
        doc = {"command": command, "config": config, "results": results,
               "warnings": warnings, "seed": seed}
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    elif fmt == "csv":
        if csv_rows is None:
            raise CliError(f"{command} has no CSV representation")
        header, rows = csv_rows
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        text = _render_text(command, results, warnings)
    _write_out(args, text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_out(args, text: str) -> None:
    out = getattr(args, "output", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        if np.isnan(v):
            return ""
        return f"{v:.6f}"
    return str(v)


def _table_text(header: list[str], rows: list[list]) -> str:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _render_text(command: str, results: dict, warnings: list[str]) -> str:
    parts = []
    if command in ("fit", "decode_header"):
        parts.append(f"m = {results['m']}   nll = {results['nll']:.6f}   "
                     f"AIC = {results['aic']:.4f}   BIC = {results['bic']:.4f}")
        parts.append(f"converged = {results['converged']} "
                     f"({results['termination']}, {results['iterations']} iterations)")
        rows = [[n, d["estimate"], d["std_error"]] for n, d in results["estimates"].items()]
        parts.append(_table_text(["parameter", "estimate", "std_error"], rows))
    elif command == "select":
        rows = [[r["m"], r["k"], r["nll"], r["aic"], r["bic"], r["converged"]]
                for r in results["table"]]
        parts.append(_table_text(["m", "k", "nll", "AIC", "BIC", "converged"], rows))
        parts.append(f"AIC prefers m = {results['best_aic']}, BIC prefers m = {results['best_bic']}")
    elif command in ("ci", "bootstrap"):
        rows = [[r["name"], r["estimate"], r["lower"], r["upper"], r["method"], r["status"]]
                for r in results["intervals"]]
        parts.append(_table_text(["parameter", "estimate", "lower", "upper", "method", "status"], rows))
    elif command == "profile":
        parts.append(f"parameter {results['param']}: working CI "
                     f"({results['lower']:.6f}, {results['upper']:.6f}), status {results['status']}")
        if results.get("natural_name"):
            parts.append(f"{results['natural_name']}: ({results['natural_lower']:.6f}, "
                         f"{results['natural_upper']:.6f})")
        rows = [[v, r] for v, r in results["trace"]]
        parts.append(_table_text(["value", "likelihood_ratio"], rows))
    elif command == "coverage":
        header = ["parameter", "true_value"] + [f"{m}_%" for m in results["methods"]]
        rows = []
        for i, name in enumerate(results["names"]):
            row = [name, results["true_values"][i]]
            row += [results["coverage"][m][i] for m in results["methods"]]
            rows.append(row)
        parts.append(_table_text(header, rows))
        parts.append(f"replicates = {results['n_reps']}, replaced = {results['replaced']}")
    elif command == "bench":
        header = ["mode", "mean_ms", "ms_lo", "ms_hi", "mean_iters", "iters_lo",
                  "iters_hi", "ratio", "ratio_lo", "ratio_hi"]
        rows = []
        for mode, d in results["modes"].items():
            rows.append([mode, d["mean_time_ms"], d["time_ci_ms"][0], d["time_ci_ms"][1],
                         d["mean_iterations"], d["iterations_interval"][0],
                         d["iterations_interval"][1], *d["ratio"]])
        parts.append(_table_text(header, rows))
    elif command == "decode":
        rows = [[t, results["x"][t] if not results["missing"][t] else "NA",
                 results["local"][t] + 1, results["viterbi"][t] + 1,
                 results["cond_mean"][t]] +
                [results["smoothing"][t][i] for i in range(results["m"])]
                for t in range(len(results["x"]))]
        header = ["t", "x", "local_state", "viterbi_state", "cond_mean"] + \
                 [f"p_state{i+1}" for i in range(results["m"])]
        parts.append(_table_text(header, rows))
    elif command == "forecast":
        rows = [[k, p] for k, p in enumerate(results["pmf"])]
        parts.append(_table_text(["x", "probability"], rows))
    elif command == "simulate":
        parts.append("\n".join(str(v) for v in results["counts"]) + "\n")
        for w in warnings:
            sys.stderr.write(f"warning: {w}\n")
        return parts[-1]
    for w in warnings:
        parts.append(f"warning: {w}")
    return "\n".join(parts)


# -- subcommand implementations ---------------------------------------------------


def _cmd_fit(args) -> int:
    result = _fit_from_args(args)
    results = _fit_results_dict(result)
    rows = [[n, d["estimate"], d["std_error"]] for n, d in results["estimates"].items()]
    _emit(args, "fit", results, (["parameter", "estimate", "std_error"], rows), [])
    if not result.converged:
        sys.stderr.write(json.dumps({"error": "fit did not converge",
                                     "report": {
                                         "termination": result.report.termination.value,
                                         "iterations": result.report.iterations,
                                         "f_opt": result.report.f_opt,
                                         "grad_norm": result.report.grad_norm,
                                     }}) + "\n")
        return 3
    return 0


def _parse_m_range(spec: str) -> list[int]:
    spec = spec.strip()
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in spec.split(",") if tok.strip()]


def _cmd_select(args) -> int:
    x = load_dataset(args.data)
    m_range = _parse_m_range(args.states)
    rows = model_select(x, m_range)
    table = [
        {"m": r.m, "k": r.k, "nll": r.nll, "aic": r.aic, "bic": r.bic,
         "converged": r.converged, "error": r.error}
        for r in rows
    ]
    ok = [r for r in rows if r.error is None]
    results = {
        "table": table,
        "best_aic": min(ok, key=lambda r: r.aic).m if ok else None,
        "best_bic": min(ok, key=lambda r: r.bic).m if ok else None,
    }
    csv_rows = ([
        "m", "k", "nll", "aic", "bic", "converged"],
        [[r.m, r.k, r.nll, r.aic, r.bic, r.converged] for r in rows])
    _emit(args, "select", results, csv_rows, [])
    return 0


def _cmd_ci(args) -> int:
    methods = [tok.strip().lower() for tok in args.methods.split(",") if tok.strip()]
    bad = [tok for tok in methods if tok not in ("wald", "profile", "bootstrap")]
    if bad:
        raise CliError(f"unknown CI methods: {bad}")
    result = _fit_from_args(args)
    warnings = []
    tables = []
    if "wald" in methods:
        tables.append(wald_ci(sd_report(result), args.level, clip=args.clip))
    if "profile" in methods:
        tables.append(profile_table(result, args.level))
        if result.m > 2:
            warnings.append("profile intervals for TPM entries are biased for "
                            "models with more than two states; treat with care")
    if "bootstrap" in methods:
        boot = bootstrap_ci(result, B=args.replicates, level=args.level,
                            rng_seed=args.seed, threads=resolve_threads(args.threads))
        tables.append(boot.table)
        warnings.extend(_bootstrap_warnings(boot))
    all_rows = IntervalTable([row for t in tables for row in t])
    results = {"m": result.m, "nll": result.nll, "level": args.level,
               "intervals": _interval_rows(all_rows)}
    csv_rows = (["name", "estimate", "lower", "upper", "method", "level", "status"],
                [[r.name, r.estimate, r.lower, r.upper, r.method.value, r.level,
                  r.status.value] for r in all_rows])
    _emit(args, "ci", results, csv_rows, warnings, seed=getattr(args, "seed", None))
    return 0


def _bootstrap_warnings(boot) -> list[str]:
    out = []
    if boot.archive.n_rejected_paths:
        out.append(f"{boot.archive.n_rejected_paths} simulated paths replaced "
                   "(state sequence missed a state)")
    if boot.archive.n_rejected_fits:
        out.append(f"{boot.archive.n_rejected_fits} refits replaced "
                   "(no proper convergence)")
    return out


def _cmd_profile(args) -> int:
    result = _fit_from_args(args)
    names = [result.objective.working_names()[i]
             for i, s in enumerate(result.objective.pmap.slots()) if s >= 0]
    token = args.param.strip()
    if token.isdigit():
        which = int(token)
        if which >= len(names):
            raise CliError(f"free-parameter index {which} out of range (< {len(names)})")
    else:
        if token not in names:
            raise CliError(f"unknown free parameter {token!r}; valid: {names}")
        which = names.index(token)
    prof = profile_ci(result, which, args.level)
    results = {
        "param": prof.name, "mle": prof.mle, "lower": prof.lower,
        "upper": prof.upper, "status": prof.status.value, "level": args.level,
        "trace": [[float(v), float(r)] for v, r in prof.trace],
    }
    if prof.name.startswith("eta"):
        idx = prof.name[3:]
        results.update(natural_name=f"lambda{idx}",
                       natural_lower=float(np.exp(prof.lower)),
                       natural_upper=float(np.exp(prof.upper)))
    csv_rows = (["value", "likelihood_ratio"], results["trace"])
    _emit(args, "profile", results, csv_rows, [])
    return 0


def _cmd_bootstrap(args) -> int:
    result = _fit_from_args(args)
    boot = bootstrap_ci(result, B=args.replicates, level=args.level,
                        rng_seed=args.seed, threads=resolve_threads(args.threads))
    if args.archive:
        with open(args.archive, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(boot.archive.names)
            writer.writerows(boot.archive.estimates.tolist())
    results = {
        "m": result.m, "level": args.level, "B": boot.archive.B,
        "rejected_paths": boot.archive.n_rejected_paths,
        "rejected_fits": boot.archive.n_rejected_fits,
        "intervals": _interval_rows(boot.table),
    }
    csv_rows = (["name", "estimate", "lower", "upper", "method", "level", "status"],
                [[r.name, r.estimate, r.lower, r.upper, r.method.value, r.level,
                  r.status.value] for r in boot.table])
    _emit(args, "bootstrap", results, csv_rows, _bootstrap_warnings(boot), seed=args.seed)
    return 0


def _truth_from_args(args) -> NaturalParams:
    if bool(args.preset) == bool(getattr(args, "truth_from", None) or
                                 getattr(args, "params_from", None)):
        raise CliError("exactly one of --preset / a params JSON must be given")
    if args.preset:
        return PRESETS[args.preset]
    path = getattr(args, "truth_from", None) or getattr(args, "params_from", None)
    with open(path) as fh:
        doc = json.load(fh)
    est = doc.get("results", doc)["estimates"]
    m = doc.get("results", doc)["m"]
    lam = np.array([est[f"lambda{i+1}"]["estimate"] for i in range(m)])
    gamma = np.array([[est[f"gamma{i+1}{j+1}"]["estimate"] for j in range(m)]
                      for i in range(m)])
    gamma = gamma / gamma.sum(axis=1, keepdims=True)
    return NaturalParams(m, lam, gamma)


def _cmd_coverage(args) -> int:
    truth = _truth_from_args(args)
    methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]
    cov = coverage_study(truth, T=args.length, n_reps=args.reps, level=args.level,
                         methods=methods, rng_seed=args.seed, B=args.replicates,
                         threads=resolve_threads(args.threads))
    results = {
        "names": cov.names,
        "true_values": [float(v) for v in cov.true_values],
        "methods": cov.methods,
        "coverage": {m: [float(v) for v in cov.coverage[m]] for m in cov.methods},
        "n_reps": cov.n_reps,
        "level": cov.level,
        "replaced": cov.replaced,
    }
    header = ["name", "true_value"] + [f"coverage_{m}" for m in cov.methods]
    rows = [[cov.names[i], float(cov.true_values[i])] +
            [float(cov.coverage[m][i]) for m in cov.methods]
            for i in range(len(cov.names))]
    _emit(args, "coverage", results, (header, rows), [], seed=args.seed)
    return 0


def _cmd_bench(args) -> int:
    x = load_dataset(args.data)
    modes = [Mode(tok.strip()) for tok in args.modes.split(",") if tok.strip()]
    out = bench(x, args.states, modes=modes, n_reps=args.reps, rng_seed=args.seed,
                threads=resolve_threads(args.threads))
    results = {"baseline": out.baseline.value, "n_reps": out.n_reps,
               "rejected_paths": out.rejected_paths, "rejected_fits": out.rejected_fits,
               "modes": {}}
    for mode in modes:
        mb = out.per_mode[mode]
        results["modes"][mode.value] = {
            "mean_time_ms": mb.mean_time * 1e3,
            "time_ci_ms": [mb.time_ci[0] * 1e3, mb.time_ci[1] * 1e3],
            "mean_iterations": mb.mean_iterations,
            "iterations_interval": list(mb.iterations_interval),
            "ratio": list(out.ratios[mode]),
        }
    header = ["mode", "mean_time_ms", "time_lo_ms", "time_hi_ms", "mean_iterations",
              "iters_lo", "iters_hi", "ratio", "ratio_lo", "ratio_hi"]
    rows = []
    for m in modes:
        d = results["modes"][m.value]
        rows.append([m.value, d["mean_time_ms"], *d["time_ci_ms"],
                     d["mean_iterations"], *d["iterations_interval"], *d["ratio"]])
    _emit(args, "bench", results, (header, rows), [
        "wall-clock fields vary run to run; iteration statistics are seeded"],
        seed=args.seed)
    return 0


def _cmd_decode(args) -> int:
    result = _fit_from_args(args)
    x = result.objective.x
    inf = infer_states(result.params, x)
    cond_mean = result.params.lam[inf.local_path]
    results = {
        "m": result.m,
        "x": [int(v) for v in x.values],
        "missing": [bool(b) for b in x.missing],
        "smoothing": [[float(v) for v in row] for row in inf.smoothing],
        "local": [int(s) for s in inf.local_path],
        "viterbi": [int(s) for s in inf.viterbi_path],
        "cond_mean": [float(v) for v in cond_mean],
    }
    header = ["t", "x", "local_state", "viterbi_state", "cond_mean"] + \
             [f"p_state{i+1}" for i in range(result.m)]
    rows = [[t, "NA" if x.missing[t] else int(x.values[t]), inf.local_path[t] + 1,
             inf.viterbi_path[t] + 1, float(cond_mean[t])] +
            [float(v) for v in inf.smoothing[t]]
            for t in range(x.T)]
    _emit(args, "decode", results, (header, rows), [])
    return 0


def _cmd_forecast(args) -> int:
    if args.horizon < 1:
        raise CliError("--horizon must be >= 1")
    result = _fit_from_args(args)
    pmf = forecast_pmf(result.params, result.objective.x, args.horizon, args.max_x)
    results = {"horizon": args.horizon, "pmf": [float(v) for v in pmf],
               "total_mass": float(pmf.sum())}
    csv_rows = (["x", "probability"], [[k, float(v)] for k, v in enumerate(pmf)])
    _emit(args, "forecast", results, csv_rows, [])
    return 0


def _cmd_simulate(args) -> int:
    truth = _truth_from_args(args)
    if args.length < 1:
        raise CliError("--length must be >= 1")
    x, states = simulate_hmm(truth, args.length, args.seed)
    if args.states_out:
        with open(args.states_out, "w") as fh:
            fh.write("\n".join(str(int(s) + 1) for s in states) + "\n")
    text = "\n".join(str(int(v)) for v in x.values) + "\n"
    _write_out(args, text)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "select": _cmd_select,
    "ci": _cmd_ci,
    "profile": _cmd_profile,
    "bootstrap": _cmd_bootstrap,
    "coverage": _cmd_coverage,
    "bench": _cmd_bench,
    "decode": _cmd_decode,
    "forecast": _cmd_forecast,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CliError, HmmError, OSError, json.JSONDecodeError) as e:
        sys.stderr.write(json.dumps({"error": str(e), "type": type(e).__name__}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
