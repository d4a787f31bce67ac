"""Forward-mode automatic differentiation over small parameter vectors.

`Dual` carries a value and an n-vector of first partials; `Dual2` adds the
full symmetric matrix of second partials.  Every arithmetic rule is exact up
to floating-point rounding, so gradients and Hessians obtained here are
machine-precision, not finite-difference approximations.

Forward mode suits this package: the models in scope have at most a few
dozen active parameters, and a single evaluation of a function built from
these scalars yields all partials at once.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "Dual",
    "Dual2",
    "exp",
    "log",
    "log_factorial",
    "value_of",
    "grad",
    "hessian",
    "jacobian",
    "grad_and_value",
    "hessian_pieces",
]

# log(k!) for k <= 256 precomputed; larger counts fall back to lgamma.
_LOG_FACTORIAL_TABLE = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, 257)))])


def log_factorial(k: int) -> float:
    """log(k!) via lookup table for k <= 256, lgamma beyond."""
    if k < 0:
        raise DomainError(f"log_factorial of negative count {k}")
    if k <= 256:
        return float(_LOG_FACTORIAL_TABLE[k])
    return math.lgamma(k + 1.0)


def value_of(x) -> float:
    """Value part of a scalar, dual or plain."""
    return x.value if isinstance(x, (Dual, Dual2)) else float(x)


class Dual:
    """First-order forward-mode scalar: value plus n first partials."""

    __slots__ = ("value", "deriv")

    def __init__(self, value: float, deriv: np.ndarray):
        self.value = float(value)
        self.deriv = deriv

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.deriv + other.deriv)
        return Dual(self.value + other, self.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.deriv - other.deriv)
        return Dual(self.value - other, self.deriv)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.deriv)

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.deriv * other.value + other.deriv * self.value,
            )
        return Dual(self.value * other, self.deriv * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.value == 0.0:
                raise DomainError("division by zero value")
            inv = 1.0 / other.value
            return Dual(
                self.value * inv,
                (self.deriv - other.deriv * (self.value * inv)) * inv,
            )
        return Dual(self.value / other, self.deriv / other)

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise DomainError("division by zero value")
        v = other / self.value
        return Dual(v, -self.deriv * (v / self.value))

    def __pow__(self, p):
        if isinstance(p, Dual):
            return exp(p * log(self))
        if p == 0:
            return Dual(1.0, np.zeros_like(self.deriv))
        if self.value == 0.0 and p < 1:
            raise DomainError("0 raised to a power below 1 has no derivative")
        return Dual(self.value**p, p * self.value ** (p - 1) * self.deriv)

    # comparisons act on values only
    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"

    # -- primitives -------------------------------------------------------

    def exp(self):
        v = math.exp(self.value)
        return Dual(v, v * self.deriv)

    def log(self):
        if self.value <= 0.0:
            raise DomainError(f"log of non-positive value {self.value}")
        return Dual(math.log(self.value), self.deriv / self.value)


class Dual2:
    """Second-order forward-mode scalar: value, gradient and symmetric Hessian.

    Every rule builds the Hessian from symmetric ingredients (scaled Hessians
    and grouped `outer + outer.T` pairs); materialized Hessians are mirrored
    from the lower triangle (see `symmetrize`), making symmetry bit-exact.
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Dual2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return Dual2(self.value - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Dual2(other - self.value, -self.grad, -self.hess)

    def __neg__(self):
        return Dual2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            cross = np.outer(self.grad, other.grad)
            # the cross pair is grouped so its bitwise symmetry survives the sum
            return Dual2(
                self.value * other.value,
                self.grad * other.value + other.grad * self.value,
                self.hess * other.value + other.hess * self.value + (cross + cross.T),
            )
        return Dual2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def _reciprocal(self):
        if self.value == 0.0:
            raise DomainError("division by zero value")
        inv = 1.0 / self.value
        outer = np.outer(self.grad, self.grad)
        return Dual2(
            inv,
            -self.grad * inv * inv,
            -self.hess * inv * inv + (2.0 * inv**3) * outer,
        )

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other._reciprocal()
        return Dual2(self.value / other, self.grad / other, self.hess / other)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Dual2):
            return exp(p * log(self))
        if p == 0:
            return Dual2(1.0, np.zeros_like(self.grad), np.zeros_like(self.hess))
        if self.value == 0.0 and p < 2:
            raise DomainError("0 raised to a power below 2 has no second derivative")
        return self._chain(
            self.value**p,
            p * self.value ** (p - 1),
            p * (p - 1) * self.value ** (p - 2),
        )

    def _chain(self, fv: float, d1: float, d2: float) -> "Dual2":
        outer = np.outer(self.grad, self.grad)
        return Dual2(fv, d1 * self.grad, d1 * self.hess + d2 * outer)

    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)

    def __repr__(self):
        return f"Dual2({self.value!r}, {self.grad!r}, ...)"

    def exp(self):
        v = math.exp(self.value)
        return self._chain(v, v, v)

    def log(self):
        if self.value <= 0.0:
            raise DomainError(f"log of non-positive value {self.value}")
        inv = 1.0 / self.value
        return self._chain(math.log(self.value), inv, -inv * inv)


def exp(x):
    """exp() for plain floats and duals alike."""
    if isinstance(x, (Dual, Dual2)):
        return x.exp()
    return math.exp(x)


def log(x):
    """log() for plain floats and duals alike."""
    if isinstance(x, (Dual, Dual2)):
        return x.log()
    if x <= 0.0:
        raise DomainError(f"log of non-positive value {x}")
    return math.log(x)


def _seed_duals(x: np.ndarray) -> list[Dual]:
    x = np.asarray(x, dtype=float)
    n = x.size
    return [Dual(x[i], np.eye(n)[i]) for i in range(n)]


def _seed_dual2(x: np.ndarray) -> list[Dual2]:
    x = np.asarray(x, dtype=float)
    n = x.size
    return [Dual2(x[i], np.eye(n)[i], np.zeros((n, n))) for i in range(n)]


def grad(f, x: np.ndarray) -> np.ndarray:
    """Gradient of a scalar function at x, exact up to rounding."""
    out = f(_seed_duals(x))
    if isinstance(out, Dual):
        return out.deriv.copy()
    return np.zeros(np.asarray(x).size)


def grad_and_value(f, x: np.ndarray) -> tuple[float, np.ndarray]:
    out = f(_seed_duals(x))
    if isinstance(out, Dual):
        return out.value, out.deriv.copy()
    return float(out), np.zeros(np.asarray(x).size)


def symmetrize(h: np.ndarray) -> np.ndarray:
    """Mirror the lower triangle; makes symmetry bit-exact by storage."""
    return np.tril(h) + np.tril(h, -1).T


def hessian(f, x: np.ndarray) -> np.ndarray:
    """Symmetric matrix of second partials of f at x; bit-identical across
    the diagonal (the lower triangle is stored and mirrored)."""
    out = f(_seed_dual2(x))
    if isinstance(out, Dual2):
        return symmetrize(out.hess)
    return np.zeros((np.asarray(x).size,) * 2)


def hessian_pieces(f, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """(value, gradient, Hessian) from one second-order forward pass."""
    out = f(_seed_dual2(x))
    if isinstance(out, Dual2):
        return out.value, out.grad.copy(), symmetrize(out.hess)
    n = np.asarray(x).size
    return float(out), np.zeros(n), np.zeros((n, n))


def jacobian(g, x: np.ndarray) -> np.ndarray:
    """Jacobian of a vector-valued function; row i is the gradient of g_i."""
    n = np.asarray(x).size
    outputs = g(_seed_duals(x))
    rows = []
    for out in outputs:
        rows.append(out.deriv if isinstance(out, Dual) else np.zeros(n))
    return np.array(rows)
