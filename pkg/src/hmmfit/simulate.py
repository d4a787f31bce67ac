"""HMM data generation and the optimizer-mode benchmark harness."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._parallel import parallel_map
from .model import converged_identifiable, fit, make_objective
from .optimize import Mode, OptimizerConfig
from .params import NaturalParams, ObservationSeq

# Reference generating models for the simulation studies.
PRESETS: dict[str, NaturalParams] = {
    "sim2": NaturalParams(2, [1.0, 7.0], [[0.95, 0.05], [0.15, 0.85]]),
    "sim3": NaturalParams(
        3,
        [1.0, 4.0, 7.0],
        [[0.95, 0.025, 0.025], [0.05, 0.90, 0.05], [0.075, 0.075, 0.85]],
    ),
    "sim4": NaturalParams(
        4,
        [1.0, 5.0, 9.0, 13.0],
        [
            [0.85, 0.05, 0.05, 0.05],
            [0.05, 0.85, 0.05, 0.05],
            [0.05, 0.10, 0.80, 0.05],
            [0.034, 0.033, 0.033, 0.90],
        ],
    ),
}


def as_generator(seed) -> np.random.Generator:
    """Accept an int, a tuple/list stream key, or a ready Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_hmm(p: NaturalParams, T: int, rng_seed) -> tuple[ObservationSeq, np.ndarray]:
    """Draw (observations, true state path) from the model; deterministic
    under a fixed seed."""
    if T < 1:
        raise ValueError("sequence length must be >= 1")
    p = p.with_delta()
    rng = as_generator(rng_seed)
    u = rng.random(T)
    states = _kernels.sample_chain(u, np.cumsum(p.delta), np.cumsum(p.gamma, axis=1))
    counts = rng.poisson(p.lam[states])
    x = ObservationSeq(counts.astype(np.int64), np.zeros(T, dtype=bool))
    return x, states


def visits_all_states(states: np.ndarray, m: int) -> bool:
    return np.unique(states).size == m


def simulate_accepted(p: NaturalParams, T: int, seed_key: tuple,
                      max_attempts: int = 1000) -> tuple[ObservationSeq, np.ndarray, int]:
    """Simulate, rejecting paths that do not visit every state.

    Returns (observations, states, rejected_count); the RNG stream is keyed
    by (seed_key..., attempt) so replacement draws stay deterministic.
    """
    for attempt in range(max_attempts):
        x, states = simulate_hmm(p, T, (*seed_key, attempt))
        if visits_all_states(states, p.m):
            return x, states, attempt
    raise RuntimeError(f"no state-complete sample in {max_attempts} attempts")


# -- benchmark harness --------------------------------------------------------


@dataclass
class ModeBench:
    mode: Mode
    mean_time: float
    time_ci: tuple[float, float]
    mean_iterations: float
    iterations_interval: tuple[float, float]
    times: np.ndarray = field(repr=False, default=None)
    iterations: np.ndarray = field(repr=False, default=None)


@dataclass
class BenchResult:
    """Per-mode timing/iteration statistics over parametric resamples."""

    per_mode: dict
    ratios: dict
    baseline: Mode
    n_reps: int
    seed: int
    rejected_paths: int
    rejected_fits: int


def _percentile_interval(values: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    lo, hi = np.quantile(values, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def bench(x: ObservationSeq, m: int, modes=None, n_reps: int = 50,
          rng_seed: int = 0, cfg: OptimizerConfig | None = None,
          threads: int = 1) -> BenchResult:
    """Time the optimizer modes over datasets resampled from the fitted model.

    Only the minimize call is timed (objective construction excluded).  The
    timing loop runs serially in this process by default so wall-clock noise
    from worker contention does not pollute the measurements; pass threads>1
    to parallelize anyway when only iteration statistics matter.
    """
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    modes = list(modes) if modes is not None else list(Mode)
    base_cfg = cfg or OptimizerConfig()

    base = fit(make_objective(x, m), OptimizerConfig(mode=Mode.GRAD_HESS,
                                                     max_iter=base_cfg.max_iter))
    base_start = base.w_full[: base.objective.tau_base].copy()
    rejected_paths = 0
    rejected_fits = 0
    tasks = []
    for r in range(n_reps):
        fit_attempt = 0
        while True:
            xr, _, rej = simulate_accepted(base.params, x.T, (rng_seed, r, fit_attempt))
            rejected_paths += rej
            probe = fit(make_objective(xr, m, w0=base_start),
                        OptimizerConfig(mode=Mode.GRAD_HESS))
            if converged_identifiable(probe):
                break
            rejected_fits += 1
            fit_attempt += 1
            if fit_attempt > 100:
                raise RuntimeError("could not find a refittable bench replicate")
        tasks.append(xr)

    times = {mode: np.empty(n_reps) for mode in modes}
    iters = {mode: np.empty(n_reps) for mode in modes}

    def run_one(args):
        idx, xr = args
        out = []
        for mode in modes:
            obj = make_objective(xr, m, w0=base_start)
            run_cfg = OptimizerConfig(mode=mode, max_iter=base_cfg.max_iter,
                                      rel_tol=base_cfg.rel_tol,
                                      grad_tol=base_cfg.grad_tol,
                                      max_step=base_cfg.max_step)
            t0 = time.perf_counter()
            result = fit(obj, run_cfg)
            dt = time.perf_counter() - t0
            out.append((dt, result.report.iterations))
        return idx, out

    results = parallel_map(run_one, list(enumerate(tasks)), threads)
    for idx, out in results:
        for mode, (dt, it) in zip(modes, out):
            times[mode][idx] = dt
            iters[mode][idx] = it

    per_mode = {}
    for mode in modes:
        t = times[mode]
        se = t.std(ddof=1) / np.sqrt(n_reps)
        per_mode[mode] = ModeBench(
            mode=mode,
            mean_time=float(t.mean()),
            time_ci=(float(t.mean() - 1.959963984540054 * se),
                     float(t.mean() + 1.959963984540054 * se)),
            mean_iterations=float(iters[mode].mean()),
            iterations_interval=_percentile_interval(iters[mode]),
            times=t,
            iterations=iters[mode],
        )

    baseline = Mode.NO_DERIV if Mode.NO_DERIV in modes else modes[0]
    ratios = {}
    for mode in modes:
        r = times[baseline] / times[mode]
        ratios[mode] = (float(r.mean()), *_percentile_interval(r))
    return BenchResult(per_mode, ratios, baseline, n_reps, rng_seed,
                       rejected_paths, rejected_fits)
