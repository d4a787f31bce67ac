"""Domain types for Poisson HMMs and the natural <-> working reparametrization.

Natural space: intensities lambda (> 0), transition probability matrix gamma
(rows sum to 1), stationary distribution delta (derived from gamma).

Working space: eta_i = log(lambda_i) and, for every off-diagonal entry,
tau_ij = log(gamma_ij / gamma_ii).  The inverse maps each row of gamma through
a softmax with the diagonal as reference category, so any finite working
vector yields a valid TPM.

Off-diagonal tau entries are packed column by column (the diagonal skipped),
i.e. (2,1), (3,1), ..., (1,2), (3,2), ...; this matches the column-major
convention of the reference tables the test suite checks against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTPM, NonPositiveRate, NumericOverflow, SingularSystem

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


def offdiag_pairs(m: int) -> list[tuple[int, int]]:
    """(row, col) pairs of the off-diagonal TPM entries in packing order."""
    return [(i, j) for j in range(m) for i in range(m) if i != j]


def working_names(m: int, estimated_init: bool = False) -> list[str]:
    """Labels of the working-parameter slots, 1-based like the report tables."""
    names = [f"eta{i + 1}" for i in range(m)]
    names += [f"tau{i + 1}{j + 1}" for i, j in offdiag_pairs(m)]
    if estimated_init:
        names += [f"xi{i + 2}" for i in range(m - 1)]
    return names


@dataclass(frozen=True)
class NaturalParams:
    """m-state Poisson HMM in natural space; immutable after construction."""

    m: int
    lam: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        gamma = np.asarray(self.gamma, dtype=float).reshape(self.m, self.m)
        if self.m < 1:
            raise ValueError("state count must be >= 1")
        if lam.shape != (self.m,):
            raise ValueError(f"lambda must have length {self.m}")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise NonPositiveRate(f"all intensities must be positive and finite, got {lam}")
        if np.any(gamma < 0) or np.any(gamma > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        rowsums = gamma.sum(axis=1)
        if np.any(np.abs(rowsums - 1.0) > 1e-8):
            raise ValueError(f"TPM rows must sum to 1, got row sums {rowsums}")
        delta = self.delta
        if delta is not None:
            delta = np.asarray(delta, dtype=float).reshape(-1)
            if delta.shape != (self.m,):
                raise ValueError(f"delta must have length {self.m}")
        for arr in (lam, gamma) + ((delta,) if delta is not None else ()):
            arr.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", delta)

    def with_delta(self) -> "NaturalParams":
        """Return a copy with the stationary distribution populated."""
        if self.delta is not None:
            return self
        return NaturalParams(self.m, self.lam, self.gamma, stationary_dist(self.gamma))

    def permuted(self, order: np.ndarray) -> "NaturalParams":
        """Relabel states by `order` (new state k is old state order[k])."""
        order = np.asarray(order)
        delta = None if self.delta is None else self.delta[order]
        return NaturalParams(self.m, self.lam[order], self.gamma[np.ix_(order, order)], delta)


@dataclass(frozen=True)
class WorkingParams:
    """Unconstrained parameter vector (eta, tau) fed to the optimizer."""

    m: int
    eta: np.ndarray
    tau: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        tau = np.asarray(self.tau, dtype=float).reshape(-1)
        if eta.shape != (self.m,):
            raise ValueError(f"eta must have length {self.m}")
        if tau.shape != (self.m * (self.m - 1),):
            raise ValueError(f"tau must have length m(m-1) = {self.m * (self.m - 1)}")
        eta.flags.writeable = False
        tau.flags.writeable = False
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "tau", tau)

    @property
    def vector(self) -> np.ndarray:
        """Concatenated (eta, tau) vector."""
        return np.concatenate([self.eta, self.tau])

    @classmethod
    def from_vector(cls, m: int, vec: np.ndarray) -> "WorkingParams":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape != (m + m * (m - 1),):
            raise ValueError(f"expected vector of length {m + m * (m - 1)}, got {vec.shape}")
        return cls(m, vec[:m], vec[m:])


@dataclass(frozen=True)
class ObservationSeq:
    """Length-T sequence of counts; `missing` marks unobserved slots."""

    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64).reshape(-1)
        missing = np.asarray(self.missing, dtype=bool).reshape(-1)
        if values.shape != missing.shape:
            raise ValueError("values and missing mask must have the same length")
        if values.size < 1:
            raise ValueError("observation sequence must be nonempty")
        if np.any(values[~missing] < 0):
            raise ValueError("counts must be non-negative")
        values = values.copy()
        values[missing] = 0
        values.flags.writeable = False
        missing.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @property
    def T(self) -> int:
        return self.values.size

    @classmethod
    def from_iterable(cls, xs) -> "ObservationSeq":
        """Build from ints with None / NaN marking missing observations."""
        values, missing = [], []
        for x in xs:
            if x is None or (isinstance(x, float) and np.isnan(x)):
                values.append(0)
                missing.append(True)
            else:
                values.append(int(x))
                missing.append(False)
        return cls(np.array(values, dtype=np.int64), np.array(missing, dtype=bool))

    def present_values(self) -> np.ndarray:
        return self.values[~self.missing]


def natural_to_working(p: NaturalParams) -> WorkingParams:
    """eta_i = log(lambda_i); tau_ij = log(gamma_ij / gamma_ii) for i != j."""
    if np.any(p.lam <= 0):
        raise NonPositiveRate("intensities must be positive")
    diag = np.diag(p.gamma)
    if np.any(diag <= 0):
        raise DegenerateTPM("log-ratio transform undefined when a diagonal entry is 0")
    eta = np.log(p.lam)
    tau = np.array([np.log(p.gamma[i, j] / p.gamma[i, i]) for i, j in offdiag_pairs(p.m)])
    return WorkingParams(p.m, eta, tau)


def working_to_natural(w: WorkingParams) -> NaturalParams:
    """Inverse transform; populates the stationary distribution."""
    with np.errstate(over="ignore"):
        lam = np.exp(w.eta)
    if not np.all(np.isfinite(lam)):
        raise NumericOverflow("exp(eta) overflowed")
    gamma = gamma_from_tau(w.m, w.tau)
    delta = stationary_dist(gamma)
    return NaturalParams(w.m, lam, gamma, delta)


def gamma_from_tau(m: int, tau: np.ndarray) -> np.ndarray:
    """Row-wise softmax with the diagonal as reference category."""
    logits = np.zeros((m, m))
    for k, (i, j) in enumerate(offdiag_pairs(m)):
        logits[i, j] = tau[k]
    # subtracting the row max keeps exp() in range for any finite tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    with np.errstate(over="ignore"):
        ex = np.exp(shifted)
    if not np.all(np.isfinite(ex)):
        raise NumericOverflow("exp(tau) overflowed")
    return ex / ex.sum(axis=1, keepdims=True)


def stationary_dist(gamma: np.ndarray) -> np.ndarray:
    """Solve delta (I - Gamma + U) = 1 with U the all-ones matrix."""
    gamma = np.asarray(gamma, dtype=float)
    m = gamma.shape[0]
    a = np.eye(m) - gamma + np.ones((m, m))
    try:
        delta = np.linalg.solve(a.T, np.ones(m))
    except np.linalg.LinAlgError as e:
        raise SingularSystem(str(e)) from e
    if not np.all(np.isfinite(delta)):
        raise SingularSystem("stationary system produced non-finite solution")
    return delta


# -- generic-scalar versions -------------------------------------------------
#
# The helpers below duplicate the maps above for arbitrary scalar types
# (floats or AD duals) so derivatives can flow through them.  Vectors are
# plain lists, matrices lists of lists.


def lambda_from_eta_scalars(eta: list) -> list:
    from .autodiff import exp

    return [exp(e) for e in eta]


def gamma_from_tau_scalars(m: int, tau: list) -> list:
    from .autodiff import exp

    gamma = [[1.0] * m for _ in range(m)]
    for k, (i, j) in enumerate(offdiag_pairs(m)):
        gamma[i][j] = exp(tau[k])
    for i in range(m):
        denom = gamma[i][0]
        for j in range(1, m):
            denom = denom + gamma[i][j]
        for j in range(m):
            gamma[i][j] = gamma[i][j] / denom
    return gamma


def stationary_dist_scalars(gamma: list) -> list:
    """Gaussian elimination on (I - Gamma + U)^T delta = 1, generic scalars."""
    m = len(gamma)
    a = [[(1.0 if i == j else 0.0) - gamma[j][i] + 1.0 for j in range(m)] for i in range(m)]
    b = [1.0] * m
    return solve_linear_scalars(a, b)


def solve_linear_scalars(a: list, b: list) -> list:
    """Solve a x = b by partial-pivot elimination over any scalar ring."""
    m = len(b)
    a = [row[:] for row in a]
    b = b[:]
    for col in range(m):
        pivot = max(range(col, m), key=lambda r: abs(_value_of(a[r][col])))
        if _value_of(a[pivot][col]) == 0.0:
            raise SingularSystem("pivot vanished during elimination")
        a[col], a[pivot] = a[pivot], a[col]
        b[col], b[pivot] = b[pivot], b[col]
        for r in range(col + 1, m):
            f = a[r][col] / a[col][col]
            for c in range(col + 1, m):
                a[r][c] = a[r][c] - f * a[col][c]
            b[r] = b[r] - f * b[col]
    x = [0.0] * m
    for r in range(m - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, m):
            acc = acc - a[r][c] * x[c]
        x[r] = acc / a[r][r]
    return x


def _value_of(s) -> float:
    return s.value if hasattr(s, "value") else float(s)
