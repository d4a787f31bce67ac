"""Poisson HMM estimation with exact forward-mode derivatives."""

from .params import (
    NaturalParams,
    ObservationSeq,
    WorkingParams,
    natural_to_working,
    stationary_dist,
    working_to_natural,
)
from .likelihood import InitialDist, forward_backward, nll, poisson_log_pmf

__all__ = [
    "NaturalParams",
    "ObservationSeq",
    "WorkingParams",
    "natural_to_working",
    "working_to_natural",
    "stationary_dist",
    "InitialDist",
    "forward_backward",
    "nll",
    "poisson_log_pmf",
]

__version__ = "0.1.0"
