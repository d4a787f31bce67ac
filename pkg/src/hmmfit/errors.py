"""Exception types shared across the package."""


class HmmError(Exception):
    """Base class for all hmmfit errors."""


class DegenerateTPM(HmmError):
    """A diagonal transition probability is zero; the log-ratio transform is undefined."""


class NonPositiveRate(HmmError):
    """A Poisson intensity is zero or negative."""


class NumericOverflow(HmmError):
    """An exp() overflowed to infinity while mapping working to natural parameters."""


class SingularSystem(HmmError):
    """The stationary-distribution linear system is numerically singular (reducible chain)."""


class DomainError(HmmError):
    """An AD primitive was evaluated outside its domain (e.g. log of a non-positive value)."""


class NonFiniteLikelihood(HmmError):
    """The likelihood under- or overflowed beyond what scaling can absorb."""


class NonFiniteEncountered(HmmError):
    """The objective is not finite at the optimizer's starting point."""


class MapShapeMismatch(HmmError):
    """A parameter map is inconsistent with the working-parameter vector."""


class SingularHessian(HmmError):
    """The Hessian at the optimum is not invertible; no standard-error report available."""


class ParseError(HmmError):
    """A data file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyData(HmmError):
    """A data source contained no observations."""
