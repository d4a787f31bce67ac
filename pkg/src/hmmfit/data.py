"""Dataset ingestion: the embedded TYT series and plain-text count files."""

from __future__ import annotations

import sys

import numpy as np

from .errors import EmptyData, ParseError
from .params import ObservationSeq

# Daily arousal counts from the Track Your Tinnitus app, 87 successive days,
# single individual.
TYT_COUNTS = [
    6, 5, 3, 6, 4, 3, 5, 6, 6, 6,
    4, 6, 6, 4, 6, 6, 6, 6, 6, 4,
    6, 5, 6, 7, 6, 5, 5, 5, 7, 6,
    5, 6, 5, 6, 6, 6, 5, 6, 7, 7,
    6, 7, 6, 6, 6, 6, 5, 7, 6, 1,
    6, 0, 2, 1, 6, 7, 6, 6, 6, 5,
    5, 6, 6, 2, 5, 0, 1, 1, 1, 2,
    3, 1, 3, 1, 3, 0, 1, 1, 1, 4,
    1, 4, 1, 2, 2, 2, 0,
]


def tyt_dataset() -> ObservationSeq:
    return ObservationSeq.from_iterable(TYT_COUNTS)


def parse_counts(lines, source: str = "<data>") -> ObservationSeq:
    """One count per line; `NA` marks a missing value, blank lines are skipped."""
    values, missing = [], []
    for lineno, raw in enumerate(lines, start=1):
        token = raw.strip()
        if not token:
            continue
        if token.upper() == "NA":
            values.append(0)
            missing.append(True)
            continue
        try:
            v = int(token)
        except ValueError:
            raise ParseError(f"{source}: not a count: {token!r}", line=lineno) from None
        if v < 0:
            raise ParseError(f"{source}: negative count {v}", line=lineno)
        values.append(v)
        missing.append(False)
    if not values:
        raise EmptyData(f"{source}: no observations")
    return ObservationSeq(np.array(values, dtype=np.int64), np.array(missing, dtype=bool))


def load_dataset(source: str) -> ObservationSeq:
    """`tyt` for the embedded series, `-` for stdin, anything else a file path."""
    if source == "tyt":
        return tyt_dataset()
    if source == "-":
        return parse_counts(sys.stdin, source="<stdin>")
    with open(source) as fh:
        return parse_counts(fh, source=source)
