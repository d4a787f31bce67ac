"""Model assembly: objective objects, parameter maps, fitting and SE reports.

An `Objective` binds a dataset, a state count and an initial working vector
into callables fn/gr/he over the *free* parameter vector, where a
`ParameterMap` may fix working parameters or constrain groups of them to be
equal.  `fit` runs the optimizer and returns natural-space estimates;
`sd_report` propagates the inverse observed information through the
working-to-natural map (stationary distribution included) by the delta
method.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff
from .errors import MapShapeMismatch, SingularHessian
from .likelihood import Evaluator, InitialDist, n_working, nll_scalars
from .optimize import Mode, OptimizerConfig, OptimReport, minimize
from .params import (
    NaturalParams,
    ObservationSeq,
    WorkingParams,
    gamma_from_tau_scalars,
    lambda_from_eta_scalars,
    natural_to_working,
    offdiag_pairs,
    stationary_dist_scalars,
    working_names,
)


@dataclass(frozen=True)
class ParameterMap:
    """Per-working-parameter treatment: None fixes a slot at its initial
    value, equal labels constrain slots to a single shared free variable."""

    entries: tuple

    def __init__(self, entries):
        object.__setattr__(self, "entries", tuple(entries))

    @classmethod
    def identity(cls, n: int) -> "ParameterMap":
        return cls(range(n))

    @classmethod
    def fixing(cls, n: int, fixed_indices) -> "ParameterMap":
        fixed = set(fixed_indices)
        return cls(None if i in fixed else i for i in range(n))

    @property
    def n_params(self) -> int:
        return len(self.entries)

    def group_labels(self) -> list:
        seen = []
        for e in self.entries:
            if e is not None and e not in seen:
                seen.append(e)
        return seen

    @property
    def n_free(self) -> int:
        return len(self.group_labels())

    def is_identity(self) -> bool:
        labels = [e for e in self.entries if e is not None]
        return len(labels) == self.n_params and len(set(labels)) == self.n_params

    def slots(self) -> np.ndarray:
        """Free-variable index per working parameter; -1 for fixed slots."""
        order = {lab: k for k, lab in enumerate(self.group_labels())}
        return np.array([-1 if e is None else order[e] for e in self.entries], dtype=int)

    def expansion_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_params, self.n_free))
        for i, s in enumerate(self.slots()):
            if s >= 0:
                a[i, s] = 1.0
        return a

    def collapse(self, w_full: np.ndarray) -> np.ndarray:
        """First group member's value per free variable."""
        z = np.empty(self.n_free)
        seen = set()
        for i, s in enumerate(self.slots()):
            if s >= 0 and s not in seen:
                z[s] = w_full[i]
                seen.add(s)
        return z


class Objective:
    """fn/gr/he over the free parameters, data held fixed."""

    def __init__(self, x: ObservationSeq, m: int, w0_full: np.ndarray,
                 pmap: ParameterMap | None = None,
                 init: InitialDist = InitialDist.STATIONARY,
                 backend: str = "kernel"):
        self.x = x
        self.m = m
        self.init = init
        self.backend = backend
        self.n_full = n_working(m, init)
        w0_full = np.asarray(w0_full, dtype=float).reshape(-1)
        if w0_full.shape != (self.n_full,):
            raise MapShapeMismatch(
                f"working vector has length {w0_full.size}, expected {self.n_full}")
        self.w0_full = w0_full.copy()
        self.pmap = pmap if pmap is not None else ParameterMap.identity(self.n_full)
        if self.pmap.n_params != self.n_full:
            raise MapShapeMismatch(
                f"map covers {self.pmap.n_params} parameters, expected {self.n_full}")
        self._slots = self.pmap.slots()
        self._amat = self.pmap.expansion_matrix()
        self._evaluator = Evaluator(x, m, init)
        self._cache_key = None
        self._cache = None

    @property
    def n_free(self) -> int:
        return self.pmap.n_free

    @property
    def free0(self) -> np.ndarray:
        return self.pmap.collapse(self.w0_full)

    def expand(self, z: np.ndarray) -> np.ndarray:
        w = self.w0_full.copy()
        mask = self._slots >= 0
        w[mask] = np.asarray(z, dtype=float)[self._slots[mask]]
        return w

    def expand_scalars(self, z: list) -> list:
        return [self.w0_full[i] if s < 0 else z[s] for i, s in enumerate(self._slots)]

    def _evaluate(self, z: np.ndarray, order: int):
        z = np.asarray(z, dtype=float)
        key = (z.tobytes(), order)
        if self._cache_key is not None and self._cache_key[0] == key[0] \
                and self._cache_key[1] >= order:
            return self._cache
        if self.backend == "generic":
            out = self._evaluate_generic(z, order)
        else:
            w = self.expand(z)
            if order == 0:
                out = (self._evaluator.value(w), None, None)
            elif order == 1:
                f, g = self._evaluator.value_grad(w)
                out = (f, self._amat.T @ g, None)
            else:
                f, g, h = self._evaluator.value_grad_hess(w)
                out = (f, self._amat.T @ g,
                       autodiff.symmetrize(self._amat.T @ h @ self._amat))
        self._cache_key = key
        self._cache = out
        return out

    def _evaluate_generic(self, z: np.ndarray, order: int):
        def run(scalars):
            return nll_scalars(self.expand_scalars(list(scalars)), self.x, self.m, self.init)

        from .errors import NonFiniteLikelihood

        try:
            if order == 0:
                return float(run(z)), None, None
            if order == 1:
                f, g = autodiff.grad_and_value(run, z)
                return f, g, None
            f, g, h = autodiff.hessian_pieces(run, z)
            return f, g, h
        except (NonFiniteLikelihood, OverflowError):
            n = self.n_free
            return np.inf, np.zeros(n), np.zeros((n, n))

    def fn(self, z: np.ndarray) -> float:
        return self._evaluate(z, 0)[0]

    def gr(self, z: np.ndarray) -> np.ndarray:
        return self._evaluate(z, 1)[1]

    def he(self, z: np.ndarray) -> np.ndarray:
        return self._evaluate(z, 2)[2]

    # -- natural-space reporting ------------------------------------------

    @property
    def tau_base(self) -> int:
        return self.m + self.m * (self.m - 1)

    def natural_scalars(self, z: list) -> list:
        """Flattened report vector [lambda, gamma column-wise, delta, pi?]
        as generic scalars of the free parameters."""
        m = self.m
        w = self.expand_scalars(z)
        eta, tau = w[:m], w[m : self.tau_base]
        lam = lambda_from_eta_scalars(eta)
        gamma = gamma_from_tau_scalars(m, tau)
        delta = stationary_dist_scalars(gamma)
        out = list(lam) + [gamma[i][j] for j in range(m) for i in range(m)] + list(delta)
        if self.init is InitialDist.ESTIMATED:
            xi = w[self.tau_base :]
            ex = [1.0] + [autodiff.exp(v) for v in xi]
            denom = ex[0]
            for e in ex[1:]:
                denom = denom + e
            out += [e / denom for e in ex]
        return out

    def report_names(self) -> list[str]:
        m = self.m
        names = [f"lambda{i + 1}" for i in range(m)]
        names += [f"gamma{i + 1}{j + 1}" for j in range(m) for i in range(m)]
        names += [f"delta{i + 1}" for i in range(m)]
        if self.init is InitialDist.ESTIMATED:
            names += [f"pi{i + 1}" for i in range(m)]
        return names

    def working_names(self) -> list[str]:
        return working_names(self.m, self.init is InitialDist.ESTIMATED)


def default_start(x: ObservationSeq, m: int) -> WorkingParams:
    """Equally spaced data quantiles from 10% to 90% for the intensities,
    0.8 on the TPM diagonal."""
    present = x.present_values()
    lam0 = np.linspace(np.quantile(present, 0.1), np.quantile(present, 0.9), m)
    lam0 = np.maximum(lam0, 1e-3)
    # tie-break equal quantiles so states stay distinguishable
    for i in range(1, m):
        if lam0[i] <= lam0[i - 1]:
            lam0[i] = lam0[i - 1] + 0.5
    if m == 1:
        gamma0 = np.array([[1.0]])
    else:
        gamma0 = np.full((m, m), 0.2 / (m - 1))
        np.fill_diagonal(gamma0, 0.8)
    return natural_to_working(NaturalParams(m, lam0, gamma0))


def make_objective(x: ObservationSeq, m: int,
                   w0: WorkingParams | np.ndarray | None = None,
                   pmap: ParameterMap | None = None,
                   init: InitialDist = InitialDist.STATIONARY,
                   xi0: np.ndarray | None = None,
                   backend: str = "kernel") -> Objective:
    """Bind data and starting values into an objective over free parameters."""
    if w0 is None:
        w0 = default_start(x, m)
    if isinstance(w0, WorkingParams):
        vec = w0.vector
    else:
        vec = np.asarray(w0, dtype=float).reshape(-1)
    if init is InitialDist.ESTIMATED and vec.size == m + m * (m - 1):
        if xi0 is None:
            xi0 = np.zeros(m - 1)
        vec = np.concatenate([vec, np.asarray(xi0, dtype=float)])
    return Objective(x, m, vec, pmap=pmap, init=init, backend=backend)


@dataclass
class FitResult:
    """Optimum in both spaces plus information criteria."""

    objective: Objective
    report: OptimReport
    m: int
    w_full: np.ndarray
    free: np.ndarray
    params: NaturalParams
    pi: np.ndarray | None
    nll: float
    k: int
    aic: float
    bic: float

    @property
    def converged(self) -> bool:
        return self.report.converged


def _canonical_order(lam: np.ndarray) -> np.ndarray:
    return np.argsort(lam, kind="stable")


def fit(objective: Objective, cfg: OptimizerConfig | None = None) -> FitResult:
    """Minimize the objective and report natural-space estimates.

    After a fit with the identity map, states are relabeled in ascending
    order of the estimated intensities so replicated fits aggregate without
    label switching; mapped (nested) models keep the caller's labeling.
    """
    cfg = cfg or OptimizerConfig()
    z0 = objective.free0
    report = minimize(objective.fn, z0, cfg, grad=objective.gr, hess=objective.he)
    w_full = objective.expand(report.x_opt)
    m = objective.m
    base = objective.tau_base
    params = _natural_from_working(m, w_full[:base])
    pi = None
    if objective.init is InitialDist.ESTIMATED:
        pi = _softmax0(w_full[base:])

    if objective.pmap.is_identity():
        order = _canonical_order(params.lam)
        if not np.array_equal(order, np.arange(m)):
            params = params.permuted(order)
            wp = natural_to_working(params)
            pieces = [wp.vector]
            if pi is not None:
                pi = pi[order]
                pieces.append(np.log(pi[1:] / pi[0]))
            w_full = np.concatenate(pieces)

    free = objective.pmap.collapse(w_full)
    k = objective.n_free
    nll_opt = float(report.f_opt)
    T = objective.x.T
    return FitResult(
        objective=objective,
        report=report,
        m=m,
        w_full=w_full,
        free=free,
        params=params,
        pi=pi,
        nll=nll_opt,
        k=k,
        aic=2.0 * k + 2.0 * nll_opt,
        bic=k * float(np.log(T)) + 2.0 * nll_opt,
    )


def _natural_from_working(m: int, vec: np.ndarray) -> NaturalParams:
    from .params import working_to_natural

    return working_to_natural(WorkingParams.from_vector(m, vec))


def _softmax0(xi: np.ndarray) -> np.ndarray:
    logits = np.concatenate([[0.0], xi])
    ex = np.exp(logits - logits.max())
    return ex / ex.sum()


def converged_identifiable(result: FitResult) -> bool:
    """Proper convergence: optimizer converged at a point where the observed
    information is positive definite.  A singular Hessian marks a degenerate
    (merged-state or boundary) refit; replicate loops replace such fits."""
    if not result.converged:
        return False
    h = result.objective.he(result.free)
    if not np.all(np.isfinite(h)):
        return False
    eig = np.linalg.eigvalsh(h)
    return bool(eig[0] > 1e-8 * max(1.0, eig[-1]))


@dataclass
class SdReport:
    """Delta-method standard errors for the natural and derived parameters."""

    names: list[str]
    estimates: np.ndarray
    std_errors: np.ndarray
    cov: np.ndarray = field(repr=False, default=None)

    def rows(self):
        return list(zip(self.names, self.estimates, self.std_errors))

    def __getitem__(self, name: str) -> tuple[float, float]:
        i = self.names.index(name)
        return float(self.estimates[i]), float(self.std_errors[i])


def sd_report(result: FitResult) -> SdReport:
    """Standard errors sqrt(diag(J H^-1 J')) at the optimum.

    H is the Hessian of the nll over the free parameters (the observed
    information) and J the Jacobian of the working-to-natural report map;
    fixed parameters get a zero Jacobian row and hence zero standard error.
    """
    obj = result.objective
    h = obj.he(result.free)
    if not np.all(np.isfinite(h)):
        raise SingularHessian("Hessian is not finite at the optimum")
    jac = autodiff.jacobian(obj.natural_scalars, result.free)
    try:
        hinv_jt = np.linalg.solve(h, jac.T)
    except np.linalg.LinAlgError as e:
        raise SingularHessian(str(e)) from e
    cov = jac @ hinv_jt
    var = np.diag(cov).copy()
    if np.any(var < -1e-8):
        raise SingularHessian("negative variance from a non-positive-definite Hessian")
    std = np.sqrt(np.clip(var, 0.0, None))
    values = np.array([autodiff.value_of(v) for v in obj.natural_scalars(list(result.free))])
    return SdReport(obj.report_names(), values, std, cov)


@dataclass
class SelectionRow:
    m: int
    k: int
    nll: float
    aic: float
    bic: float
    converged: bool
    error: str | None = None


def model_select(x: ObservationSeq, m_range, cfg: OptimizerConfig | None = None,
                 init: InitialDist = InitialDist.STATIONARY) -> list[SelectionRow]:
    """Fit each state count and tabulate AIC/BIC; failures recorded, not fatal."""
    rows = []
    for m in sorted(m_range):
        try:
            result = fit(make_objective(x, m, init=init), cfg)
            rows.append(SelectionRow(m, result.k, result.nll, result.aic,
                                     result.bic, result.converged))
        except Exception as e:  # per-m failures must not kill the sweep
            rows.append(SelectionRow(m, n_working(m, init), np.nan, np.nan,
                                     np.nan, False, error=str(e)))
    return rows


def best_by(rows: list[SelectionRow], criterion: str = "bic") -> SelectionRow:
    ok = [r for r in rows if r.error is None and np.isfinite(getattr(r, criterion))]
    if not ok:
        raise RuntimeError("no successful fits in the selection sweep")
    return min(ok, key=lambda r: getattr(r, criterion))
