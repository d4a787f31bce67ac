"""Wald, profile-likelihood and parametric-bootstrap confidence intervals.

Wald intervals come straight from the delta-method report.  Profile
intervals walk one working parameter away from its MLE, re-optimizing the
nuisance parameters at every step, and locate the chi-square crossing by
linear interpolation; natural-space bounds follow by applying the monotone
working-to-natural transform to the working bounds.  Bootstrap intervals are
empirical percentiles over refits of simulated datasets, with states
relabeled in ascending intensity so label switching cannot corrupt the
quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist

import numpy as np

from ._parallel import parallel_map
from .errors import SingularHessian
from .likelihood import InitialDist
from .model import (
    FitResult,
    SdReport,
    converged_identifiable,
    fit,
    make_objective,
    sd_report,
)
from .optimize import Mode, OptimizerConfig, minimize
from .params import NaturalParams, ObservationSeq, offdiag_pairs
from .simulate import simulate_accepted


def z_quantile(p: float) -> float:
    return NormalDist().inv_cdf(p)


def chi2_1_quantile(level: float) -> float:
    """Quantile of chi-square with one degree of freedom (3.841 at 95%)."""
    return z_quantile((1.0 + level) / 2.0) ** 2


class CIMethod(Enum):
    WALD = "wald"
    PROFILE = "profile"
    BOOTSTRAP = "bootstrap"


class CIStatus(Enum):
    OK = "ok"
    FAILED_LOWER = "failed_lower"
    FAILED_UPPER = "failed_upper"
    UNAVAILABLE = "unavailable"


@dataclass
class IntervalRow:
    name: str
    estimate: float
    lower: float
    upper: float
    method: CIMethod
    level: float
    status: CIStatus = CIStatus.OK


@dataclass
class IntervalTable:
    rows: list

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def get(self, name: str, method: CIMethod | None = None) -> IntervalRow:
        for row in self.rows:
            if row.name == name and (method is None or row.method == method):
                return row
        raise KeyError(name)


def _is_probability(name: str) -> bool:
    return name.startswith(("gamma", "delta", "pi"))


def wald_ci(report: SdReport, level: float = 0.95, clip: bool = False) -> IntervalTable:
    """estimate +- z * SE per row; `clip` trims *displayed* probability
    bounds to [0, 1] and changes nothing else."""
    z = z_quantile((1.0 + level) / 2.0)
    rows = []
    for name, est, se in report.rows():
        lo, hi = est - z * se, est + z * se
        if clip and _is_probability(name):
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        rows.append(IntervalRow(name, float(est), float(lo), float(hi),
                                CIMethod.WALD, level))
    return IntervalTable(rows)


# -- profile likelihood --------------------------------------------------------


@dataclass
class ProfileCI:
    """Working-space profile interval for one free parameter plus the
    (value, likelihood-ratio) trace walked to find it."""

    index: int
    name: str
    mle: float
    lower: float
    upper: float
    status: CIStatus
    trace: list = field(default_factory=list)


def _profile_nll(objective, z_template: np.ndarray, which: int, value: float,
                 warm: np.ndarray | None, cfg: OptimizerConfig):
    """Re-optimize all free parameters except `which` held at `value`."""
    n = z_template.size
    rest = [i for i in range(n) if i != which]
    if not rest:
        z = z_template.copy()
        z[which] = value
        return objective.fn(z), np.empty(0)

    def embed(v):
        z = z_template.copy()
        z[which] = value
        z[rest] = v
        return z

    def f(v):
        return objective.fn(embed(v))

    def g(v):
        return objective.gr(embed(v))[rest]

    def h(v):
        return objective.he(embed(v))[np.ix_(rest, rest)]

    v0 = warm if warm is not None else z_template[rest]
    report = minimize(f, v0, cfg, grad=g, hess=h)
    return report.f_opt, report.x_opt


def profile_ci(result: FitResult, which: int, level: float = 0.95,
               target_delta_r: float = 0.5, max_steps: int = 50,
               refine: int = 3) -> ProfileCI:
    """Profile one free working parameter in both directions from its MLE.

    Steps adapt so the likelihood ratio R_p changes by roughly
    `target_delta_r` per step; each crossing of the chi-square threshold is
    located by linear interpolation between the bracketing steps, repeated
    `refine` times on the shrinking bracket so the walk's step size does not
    limit the bound's accuracy.
    """
    objective = result.objective
    z_hat = result.free.copy()
    f_ref = objective.fn(z_hat)
    q = chi2_1_quantile(level)
    sub_cfg = OptimizerConfig(mode=Mode.GRAD_HESS, max_iter=200,
                              grad_tol=1e-7, rel_tol=1e-11)

    h_full = objective.he(z_hat)
    se = None
    try:
        cov = np.linalg.inv(h_full)
        var = cov[which, which]
        if np.isfinite(var) and var > 0:
            se = float(np.sqrt(var))
    except np.linalg.LinAlgError:
        pass
    if se is None:
        se = 0.1

    trace = [(float(z_hat[which]), 0.0)]
    bounds = {}
    failed = {}
    rest = [i for i in range(z_hat.size) if i != which]
    for direction in (-1.0, 1.0):
        v_prev, r_prev = float(z_hat[which]), 0.0
        warm = z_hat[rest].copy() if rest else None
        h = 0.5 * se
        found = None
        for _ in range(max_steps):
            v_next = v_prev + direction * h
            nll_p, warm_new = _profile_nll(objective, z_hat, which, v_next, warm, sub_cfg)
            r_next = 2.0 * (nll_p - f_ref)
            trace.append((v_next, float(r_next)))
            if not np.isfinite(r_next):
                break
            if r_next >= q:
                lo_v, lo_r, hi_v, hi_r = v_prev, r_prev, v_next, r_next
                for _ in range(refine):
                    frac = (q - lo_r) / (hi_r - lo_r)
                    v_mid = lo_v + frac * (hi_v - lo_v)
                    nll_mid, _ = _profile_nll(objective, z_hat, which, v_mid,
                                              warm, sub_cfg)
                    r_mid = 2.0 * (nll_mid - f_ref)
                    trace.append((v_mid, float(r_mid)))
                    if not np.isfinite(r_mid):
                        break
                    if r_mid >= q:
                        hi_v, hi_r = v_mid, r_mid
                    else:
                        lo_v, lo_r = v_mid, r_mid
                frac = (q - lo_r) / (hi_r - lo_r)
                found = lo_v + frac * (hi_v - lo_v)
                break
            warm = warm_new if rest else None
            dr = r_next - r_prev
            if dr > 1e-8:
                h *= float(np.clip(target_delta_r / dr, 0.5, 2.0))
            else:
                h *= 2.0
            v_prev, r_prev = v_next, r_next
        key = "lower" if direction < 0 else "upper"
        if found is None:
            failed[key] = True
            bounds[key] = v_prev
        else:
            bounds[key] = found

    if failed.get("lower"):
        status = CIStatus.FAILED_LOWER
    elif failed.get("upper"):
        status = CIStatus.FAILED_UPPER
    else:
        status = CIStatus.OK
    names = [objective.working_names()[i] for i, s in enumerate(objective.pmap.slots())
             if s >= 0]
    trace.sort(key=lambda p: p[0])
    return ProfileCI(which, names[which], float(z_hat[which]),
                     float(bounds["lower"]), float(bounds["upper"]), status, trace)


def _gamma_row_at(result: FitResult, i: int, j: int, tau_value: float) -> np.ndarray:
    """TPM row i with tau_ij replaced and the other logits at their MLE."""
    m = result.m
    pairs = offdiag_pairs(m)
    tau = result.w_full[m : m + m * (m - 1)].copy()
    for k, (a, b) in enumerate(pairs):
        if (a, b) == (i, j):
            tau[k] = tau_value
    logits = np.zeros(m)
    for k, (a, b) in enumerate(pairs):
        if a == i:
            logits[b] = tau[k]
    ex = np.exp(logits - logits.max())
    return ex / ex.sum()


def profile_table(result: FitResult, level: float = 0.95,
                  max_steps: int = 50) -> IntervalTable:
    """Natural-space profile intervals for the intensities and TPM entries.

    Each working parameter is profiled individually and the bounds are pushed
    through the monotone transform (off-diagonal TPM entries with their row
    mates held at the MLE).  Diagonal entries take the hull of the
    complements over their row's profiles, which reduces to the exact
    complement for two-state models; treat the diagonal intervals with care
    for larger models.  Stationary-distribution rows are structurally
    unavailable for this method.
    """
    objective = result.objective
    if not objective.pmap.is_identity() or objective.init is not InitialDist.STATIONARY:
        raise ValueError("profile tables require the identity map and stationary init")
    m = result.m
    rep = sd_report(result)
    profiles = {}
    for idx in range(objective.n_free):
        profiles[idx] = profile_ci(result, idx, level, max_steps=max_steps)

    rows = []
    for i in range(m):
        prof = profiles[i]
        est, _ = rep[f"lambda{i + 1}"]
        rows.append(IntervalRow(f"lambda{i + 1}", est, float(np.exp(prof.lower)),
                                float(np.exp(prof.upper)), CIMethod.PROFILE, level,
                                prof.status))

    pairs = offdiag_pairs(m)
    diag_candidates = {i: [] for i in range(m)}
    offdiag_rows = {}
    for k, (i, j) in enumerate(pairs):
        prof = profiles[m + k]
        lo_row = _gamma_row_at(result, i, j, prof.lower)
        hi_row = _gamma_row_at(result, i, j, prof.upper)
        est, _ = rep[f"gamma{i + 1}{j + 1}"]
        offdiag_rows[(i, j)] = IntervalRow(
            f"gamma{i + 1}{j + 1}", est, float(lo_row[j]), float(hi_row[j]),
            CIMethod.PROFILE, level, prof.status)
        # complement row: own logit up pushes the diagonal down
        diag_candidates[i].append((float(hi_row[i]), float(lo_row[i]), prof.status))

    for j in range(m):
        for i in range(m):
            if i == j:
                lows = [c[0] for c in diag_candidates[i]]
                highs = [c[1] for c in diag_candidates[i]]
                statuses = [c[2] for c in diag_candidates[i]]
                status = next((s for s in statuses if s is not CIStatus.OK), CIStatus.OK)
                est, _ = rep[f"gamma{i + 1}{i + 1}"]
                rows.append(IntervalRow(f"gamma{i + 1}{i + 1}", est,
                                        min(lows), max(highs),
                                        CIMethod.PROFILE, level, status))
            else:
                rows.append(offdiag_rows[(i, j)])

    for i in range(m):
        est, _ = rep[f"delta{i + 1}"]
        rows.append(IntervalRow(f"delta{i + 1}", est, np.nan, np.nan,
                                CIMethod.PROFILE, level, CIStatus.UNAVAILABLE))
    order = {n: k for k, n in enumerate(rep.names)}
    rows.sort(key=lambda r: order[r.name])
    return IntervalTable(rows)


# -- parametric bootstrap -------------------------------------------------------


@dataclass
class BootstrapArchive:
    """Replicate estimates plus the rejection bookkeeping."""

    names: list
    estimates: np.ndarray
    n_rejected_paths: int
    n_rejected_fits: int
    B: int
    seed: object
    level: float


@dataclass
class BootstrapResult:
    table: IntervalTable
    archive: BootstrapArchive


def report_vector(params: NaturalParams, n_states: int) -> np.ndarray:
    p = params.with_delta()
    return np.concatenate([p.lam, p.gamma.flatten(order="F"), p.delta])


def _bootstrap_replicate(args):
    (lam, gamma, T, missing, seed_key, max_iter, w_start) = args
    truth = NaturalParams(lam.size, lam, gamma).with_delta()
    rejected_fit = 0
    rejected_path = 0
    attempt = 0
    while True:
        x, states, rej = simulate_accepted(truth, T, (*seed_key, attempt))
        rejected_path += rej
        if missing is not None and missing.any():
            x = ObservationSeq(x.values, missing)
        try:
            # start each refit at the generating estimate, the usual
            # parametric-bootstrap warm start
            result = fit(make_objective(x, truth.m, w0=w_start),
                         OptimizerConfig(mode=Mode.GRAD_HESS, max_iter=max_iter))
            if converged_identifiable(result):
                return (report_vector(result.params, truth.m), rejected_path,
                        rejected_fit, result.report.iterations)
        except Exception:
            pass
        rejected_fit += 1
        attempt += 1
        if attempt > 100:
            raise RuntimeError("bootstrap replicate would not converge")


def bootstrap_ci(result: FitResult, B: int = 200, level: float = 0.95,
                 rng_seed=0, threads: int = 1,
                 max_iter: int = 500) -> BootstrapResult:
    """Percentile intervals over B parametric refits of the fitted model.

    Replicates whose simulated state path misses a state, or whose refit
    fails to converge, are replaced (and counted in the archive).  Each
    replicate draws from an RNG stream keyed by (seed, replicate, attempt),
    so tables are bit-identical for a fixed seed regardless of `threads`.
    """
    if B < 2:
        raise ValueError("bootstrap needs at least 2 replicates")
    truth = result.params.with_delta()
    missing = result.objective.x.missing
    base = result.objective.tau_base
    w_start = result.w_full[:base].copy()
    seed_tuple = rng_seed if isinstance(rng_seed, (tuple, list)) else (rng_seed,)
    tasks = [
        (truth.lam, truth.gamma, result.objective.x.T, missing,
         (*seed_tuple, r), max_iter, w_start)
        for r in range(B)
    ]
    outputs = parallel_map(_bootstrap_replicate, tasks, threads)
    estimates = np.vstack([o[0] for o in outputs])
    rejected_paths = sum(o[1] for o in outputs)
    rejected_fits = sum(o[2] for o in outputs)

    names = result.objective.report_names()
    names = [n for n in names if not n.startswith("pi")]
    lo, hi = np.quantile(estimates, [(1 - level) / 2, (1 + level) / 2], axis=0)
    center = report_vector(truth, truth.m)
    rows = [
        IntervalRow(name, float(center[i]), float(lo[i]), float(hi[i]),
                    CIMethod.BOOTSTRAP, level)
        for i, name in enumerate(names)
    ]
    archive = BootstrapArchive(names, estimates, rejected_paths, rejected_fits,
                               B, rng_seed, level)
    return BootstrapResult(IntervalTable(rows), archive)


# -- Monte-Carlo coverage study --------------------------------------------------


@dataclass
class CoverageResult:
    names: list
    true_values: np.ndarray
    coverage: dict
    n_reps: int
    level: float
    replaced: int
    methods: list


def _coverage_replicate(args):
    (lam, gamma, T, level, method_names, seed, rep, B, max_iter) = args
    truth = NaturalParams(lam.size, lam, gamma).with_delta()
    m = truth.m
    true_vec = report_vector(truth, m)
    n_rep = true_vec.size
    replaced = 0
    for attempt in range(100):
        x, states, _ = simulate_accepted(truth, T, (seed, rep, attempt))
        try:
            result = fit(make_objective(x, m),
                         OptimizerConfig(mode=Mode.GRAD_HESS, max_iter=max_iter))
            if not converged_identifiable(result):
                raise RuntimeError("refit did not converge properly")
            contained = {}
            if "wald" in method_names:
                table = wald_ci(sd_report(result), level)
                contained["wald"] = _containment(table, true_vec, n_rep)
            if "bootstrap" in method_names:
                boot = bootstrap_ci(result, B=B, level=level,
                                    rng_seed=(seed, rep, attempt, 104729),
                                    threads=1, max_iter=max_iter)
                contained["bootstrap"] = _containment(boot.table, true_vec, n_rep)
            if "profile" in method_names:
                table = profile_table(result, level)
                rows = list(table)[: n_rep]
                if any(r.status not in (CIStatus.OK, CIStatus.UNAVAILABLE) for r in rows):
                    raise RuntimeError("profile bound not found")
                contained["profile"] = _containment(table, true_vec, n_rep)
            return contained, replaced
        except Exception:
            replaced += 1
            continue
    raise RuntimeError("coverage replicate kept failing")


def _containment(table: IntervalTable, true_vec: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, np.nan)
    for i, row in enumerate(list(table)[:n]):
        if row.status is CIStatus.UNAVAILABLE:
            continue
        out[i] = 1.0 if row.lower <= true_vec[i] <= row.upper else 0.0
    return out


def coverage_study(true_params: NaturalParams, T: int, n_reps: int,
                   level: float = 0.95, methods=("wald", "bootstrap"),
                   rng_seed: int = 0, B: int = 200, threads: int = 1,
                   max_iter: int = 500) -> CoverageResult:
    """Simulate-fit-cover loop: per-parameter containment frequencies.

    State-incomplete samples and non-converging refits are replaced, as is
    the whole replicate when a requested profile bound cannot be found, so
    every method sees the same number of effective replicates.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    truth = true_params.with_delta()
    order = np.argsort(truth.lam, kind="stable")
    truth = truth.permuted(order)
    method_names = [m.value if isinstance(m, CIMethod) else str(m) for m in methods]
    tasks = [
        (truth.lam, truth.gamma, T, level, tuple(method_names), rng_seed, rep,
         B, max_iter)
        for rep in range(n_reps)
    ]
    outputs = parallel_map(_coverage_replicate, tasks, threads)
    replaced = sum(o[1] for o in outputs)
    true_vec = report_vector(truth, truth.m)

    coverage = {}
    for name in method_names:
        hits = np.vstack([o[0][name] for o in outputs])
        coverage[name] = 100.0 * np.nanmean(hits, axis=0)

    names = [f"lambda{i + 1}" for i in range(truth.m)]
    names += [f"gamma{i + 1}{j + 1}" for j in range(truth.m) for i in range(truth.m)]
    names += [f"delta{i + 1}" for i in range(truth.m)]
    return CoverageResult(names, true_vec, coverage, n_reps, level, replaced,
                          method_names)
