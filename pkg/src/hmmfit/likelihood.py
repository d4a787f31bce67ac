"""Scaled forward/backward algorithms and the Poisson-HMM negative log-likelihood.

Two interchangeable implementations of the same recursion live here:

* `nll_scalars` is written generically over the scalar type, so plain floats
  give the value and `Dual` / `Dual2` scalars give exact first and second
  derivatives through the very same code path;
* `Evaluator` precomputes emission and transition tables with numpy and runs
  the compiled kernels from `_kernels`, returning value, gradient and Hessian
  orders of magnitude faster.

The two are asserted equal in the test suite; the scalar path is the
reference, the evaluator is what model fitting uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels, autodiff
from .autodiff import exp, log, log_factorial
from .errors import NonFiniteLikelihood
from .params import (
    NaturalParams,
    ObservationSeq,
    WorkingParams,
    gamma_from_tau_scalars,
    lambda_from_eta_scalars,
    offdiag_pairs,
    stationary_dist_scalars,
)


class InitialDist(Enum):
    """How the chain's initial distribution enters the likelihood."""

    STATIONARY = "stationary"
    ESTIMATED = "estimated"


def n_working(m: int, init: InitialDist = InitialDist.STATIONARY) -> int:
    """Length of the working vector: eta, tau and (if estimated) init logits."""
    n = m + m * (m - 1)
    if init is InitialDist.ESTIMATED:
        n += m - 1
    return n


def poisson_log_pmf(x: int, lam):
    """log P(X = x) for X ~ Poisson(lam); lam may be a dual scalar."""
    if x < 0:
        raise ValueError("counts must be non-negative")
    return x * log(lam) - lam - log_factorial(x)


@dataclass(frozen=True)
class ForwardBackwardResult:
    """Log forward/backward matrices and the log-likelihood they imply."""

    log_alpha: np.ndarray
    log_beta: np.ndarray
    log_likelihood: float


def _log_emissions(p: NaturalParams, x: ObservationSeq) -> np.ndarray:
    """T x m table of log p_i(x_t); zero rows for missing observations."""
    lf = np.array([log_factorial(int(v)) for v in x.values])
    logp = x.values[:, None] * np.log(p.lam)[None, :] - p.lam[None, :] - lf[:, None]
    logp[x.missing] = 0.0
    return logp


def forward_backward(p: NaturalParams, x: ObservationSeq) -> ForwardBackwardResult:
    """Scaled forward and backward passes, returned in log space."""
    p = p.with_delta()
    logp = _log_emissions(p, x)
    pe = np.exp(logp)
    T, m = pe.shape

    log_alpha = np.empty((T, m))
    carry = 0.0
    phi = p.delta * pe[0]
    for t in range(T):
        if t > 0:
            phi = (phi @ p.gamma) * pe[t]
        s = phi.sum()
        if not (s > 0.0) or not np.isfinite(s):
            raise NonFiniteLikelihood(f"forward scale factor {s} at t={t}")
        carry += np.log(s)
        phi = phi / s
        with np.errstate(divide="ignore"):
            log_alpha[t] = np.log(phi) + carry
    loglik = carry

    log_beta = np.empty((T, m))
    carry = 0.0
    b = np.ones(m)
    log_beta[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        b = p.gamma @ (pe[t + 1] * b)
        s = b.sum()
        if not (s > 0.0) or not np.isfinite(s):
            raise NonFiniteLikelihood(f"backward scale factor {s} at t={t}")
        carry += np.log(s)
        b = b / s
        with np.errstate(divide="ignore"):
            log_beta[t] = np.log(b) + carry

    return ForwardBackwardResult(log_alpha, log_beta, float(loglik))


# -- generic scalar recursion -------------------------------------------------


def nll_scalars(theta: list, x: ObservationSeq, m: int,
                init: InitialDist = InitialDist.STATIONARY):
    """Negative log-likelihood over generic scalars (floats or duals).

    `theta` is the working vector [eta, tau, xi?]; the same code yields the
    value, gradient or Hessian depending on the scalar type passed in.
    """
    eta = list(theta[:m])
    tau = list(theta[m : m + m * (m - 1)])
    lam = lambda_from_eta_scalars(eta)
    gamma = gamma_from_tau_scalars(m, tau)
    if init is InitialDist.ESTIMATED:
        xi = list(theta[m + m * (m - 1) :])
        if len(xi) != m - 1:
            raise ValueError("estimated initial distribution needs m-1 extra logits")
        ex = [1.0] + [exp(z) for z in xi]
        denom = ex[0]
        for e in ex[1:]:
            denom = denom + e
        start = [e / denom for e in ex]
    else:
        start = stationary_dist_scalars(gamma)

    lf = [log_factorial(int(v)) for v in x.values]

    def emission(t: int, j: int):
        if x.missing[t]:
            return 1.0
        return exp(int(x.values[t]) * eta[j] - lam[j] - lf[t])

    phi = [start[j] * emission(0, j) for j in range(m)]
    nll = 0.0
    for t in range(x.T):
        if t > 0:
            phi = [
                sum_scalars([phi[i] * gamma[i][j] for i in range(m)]) * emission(t, j)
                for j in range(m)
            ]
        s = sum_scalars(phi)
        if autodiff.value_of(s) <= 0.0 or not np.isfinite(autodiff.value_of(s)):
            raise NonFiniteLikelihood(f"scale factor underflowed at t={t}")
        nll = nll - log(s)
        phi = [f / s for f in phi]
    return nll


def sum_scalars(xs: list):
    acc = xs[0]
    for v in xs[1:]:
        acc = acc + v
    return acc


# -- fast evaluator ------------------------------------------------------------


class Evaluator:
    """Value/gradient/Hessian of the nll over the full working vector.

    Derivative tables for the transition matrix and the initial distribution
    are assembled with numpy; the time loop runs in the compiled kernels.
    """

    def __init__(self, x: ObservationSeq, m: int,
                 init: InitialDist = InitialDist.STATIONARY):
        self.x = x
        self.m = m
        self.init = init
        self.n = n_working(m, init)
        self._pairs = offdiag_pairs(m)
        self._lf = np.array([log_factorial(int(v)) for v in x.values])

    # Each helper returns dense tables over all n working slots; only the
    # slots the quantity actually depends on are nonzero.

    def _gamma_tables(self, tau: np.ndarray, order: int):
        m, n = self.m, self.n
        logits = np.zeros((m, m))
        for k, (i, j) in enumerate(self._pairs):
            logits[i, j] = tau[k]
        shifted = logits - logits.max(axis=1, keepdims=True)
        ex = np.exp(shifted)
        gv = ex / ex.sum(axis=1, keepdims=True)
        if order == 0:
            return gv, None, None
        slot = {}
        for k, (i, j) in enumerate(self._pairs):
            slot[(i, j)] = m + k
        gg = np.zeros((m, m, n))
        for i in range(m):
            pi = gv[i]
            for j in range(m):
                if j == i:
                    continue
                a = slot[(i, j)]
                for c in range(m):
                    gg[i, c, a] = pi[c] * ((1.0 if c == j else 0.0) - pi[j])
        if order == 1:
            return gv, gg, None
        gh = np.zeros((m, m, n, n))
        for i in range(m):
            pi = gv[i]
            for j in range(m):
                if j == i:
                    continue
                a = slot[(i, j)]
                for k in range(m):
                    if k == i:
                        continue
                    b = slot[(i, k)]
                    for c in range(m):
                        dj = 1.0 if c == j else 0.0
                        dk = 1.0 if c == k else 0.0
                        djk = 1.0 if j == k else 0.0
                        gh[i, c, a, b] = pi[c] * ((dj - pi[j]) * (dk - pi[k]) - pi[j] * (djk - pi[k]))
        return gv, gg, gh

    def _stationary_tables(self, gv, gg, gh, order: int):
        m, n = self.m, self.n
        a_t = (np.eye(m) - gv + np.ones((m, m))).T
        delta = np.linalg.solve(a_t, np.ones(m))
        if order == 0:
            return delta, None, None
        rhs1 = np.einsum("ija,i->ja", gg, delta)
        ddelta = np.linalg.solve(a_t, rhs1)
        if order == 1:
            return delta, ddelta, None
        rhs2 = (
            np.einsum("ijab,i->jab", gh, delta)
            + np.einsum("ija,ib->jab", gg, ddelta)
            + np.einsum("ijb,ia->jab", gg, ddelta)
        )
        d2delta = np.linalg.solve(a_t, rhs2.reshape(m, n * n)).reshape(m, n, n)
        return delta, ddelta, d2delta

    def _estimated_init_tables(self, xi: np.ndarray, order: int):
        m, n = self.m, self.n
        logits = np.concatenate([[0.0], xi])
        ex = np.exp(logits - logits.max())
        pi = ex / ex.sum()
        if order == 0:
            return pi, None, None
        base = m + m * (m - 1)
        pg = np.zeros((m, n))
        for j in range(1, m):
            a = base + j - 1
            for c in range(m):
                pg[c, a] = pi[c] * ((1.0 if c == j else 0.0) - pi[j])
        if order == 1:
            return pi, pg, None
        ph = np.zeros((m, n, n))
        for j in range(1, m):
            a = base + j - 1
            for k in range(1, m):
                b = base + k - 1
                for c in range(m):
                    dj = 1.0 if c == j else 0.0
                    dk = 1.0 if c == k else 0.0
                    djk = 1.0 if j == k else 0.0
                    ph[c, a, b] = pi[c] * ((dj - pi[j]) * (dk - pi[k]) - pi[j] * (djk - pi[k]))
        return pi, pg, ph

    def _emission_tables(self, eta: np.ndarray, lam: np.ndarray, order: int):
        x = self.x
        logp = x.values[:, None] * eta[None, :] - lam[None, :] - self._lf[:, None]
        logp[x.missing] = 0.0
        with np.errstate(over="ignore"):
            pv = np.exp(logp)
        if order == 0:
            return pv, None, None
        c1 = x.values[:, None] - lam[None, :]
        c1[x.missing] = 0.0
        if order == 1:
            return pv, c1, None
        c2 = c1 * c1 - lam[None, :]
        c2[x.missing] = 0.0
        return pv, c1, c2

    def _tables(self, w: np.ndarray, order: int):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise ValueError(f"working vector must have length {self.n}")
        m = self.m
        eta = w[:m]
        with np.errstate(over="ignore"):
            lam = np.exp(eta)
        if not np.all(np.isfinite(lam)):
            return None
        gv, gg, gh = self._gamma_tables(w[m : m + m * (m - 1)], order)
        if self.init is InitialDist.ESTIMATED:
            iv, ig, ih = self._estimated_init_tables(w[m + m * (m - 1) :], order)
        else:
            iv, ig, ih = self._stationary_tables(gv, gg, gh, order)
        pv, c1, c2 = self._emission_tables(eta, lam, order)
        if not (np.all(np.isfinite(pv)) and np.all(np.isfinite(gv)) and np.all(np.isfinite(iv))):
            return None
        return pv, c1, c2, iv, ig, ih, gv, gg, gh

    def value(self, w: np.ndarray) -> float:
        tables = self._tables(w, 0)
        if tables is None:
            return np.inf
        pv, _, _, iv, _, _, gv, _, _ = tables
        return float(_kernels.forward_value(pv, iv, gv))

    def value_grad(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        tables = self._tables(w, 1)
        if tables is None:
            return np.inf, np.zeros(self.n)
        pv, c1, _, iv, ig, _, gv, gg, _ = tables
        f, g = _kernels.forward_grad(pv, c1, iv, ig, gv, gg)
        return float(f), np.asarray(g)

    def value_grad_hess(self, w: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        tables = self._tables(w, 2)
        if tables is None:
            return np.inf, np.zeros(self.n), np.zeros((self.n, self.n))
        pv, c1, c2, iv, ig, ih, gv, gg, gh = tables
        f, g, h = _kernels.forward_hess(pv, c1, c2, iv, ig, ih, gv, gg, gh)
        return float(f), np.asarray(g), autodiff.symmetrize(np.asarray(h))


def nll(w: WorkingParams, x: ObservationSeq,
        init: InitialDist = InitialDist.STATIONARY,
        xi: np.ndarray | None = None) -> float:
    """Negative log-likelihood at the given working parameters.

    In ESTIMATED mode the m-1 initial-distribution logits must be supplied
    via `xi`; the stationary mode derives the initial distribution from the
    TPM.  Raises NonFiniteLikelihood when scaling cannot rescue the
    recursion (pathological parameters).
    """
    vec = w.vector
    if init is InitialDist.ESTIMATED:
        if xi is None:
            raise ValueError("estimated initial distribution requires xi logits")
        vec = np.concatenate([vec, np.asarray(xi, dtype=float)])
    out = Evaluator(x, w.m, init).value(vec)
    if not np.isfinite(out):
        raise NonFiniteLikelihood("likelihood not finite at these parameters")
    return out
