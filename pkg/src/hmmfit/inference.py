"""Post-fit state inference: smoothing, decoding and forecasting.

Everything here runs on the scaled log-space forward/backward matrices, so
likelihoods far below float range are handled without special casing.  Ties
in both decoders break toward the lower state index, which keeps snapshot
outputs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .likelihood import _log_emissions, forward_backward
from .params import NaturalParams, ObservationSeq


@dataclass(frozen=True)
class StateInference:
    """Smoothing matrix plus both decodings of the hidden path."""

    smoothing: np.ndarray
    local_path: np.ndarray
    viterbi_path: np.ndarray


def smoothing(p: NaturalParams, x: ObservationSeq) -> np.ndarray:
    """T x m matrix of P(C_t = i | all observations); rows sum to one."""
    fb = forward_backward(p, x)
    log_post = fb.log_alpha + fb.log_beta - fb.log_likelihood
    post = np.exp(log_post)
    return post / post.sum(axis=1, keepdims=True)


def local_decode(smooth: np.ndarray) -> np.ndarray:
    """Row-wise most probable state (0-based); ties go to the lower index."""
    return np.argmax(smooth, axis=1)


def viterbi(p: NaturalParams, x: ObservationSeq) -> np.ndarray:
    """Jointly most probable state path (0-based) by log-space dynamic
    programming."""
    p = p.with_delta()
    logp = _log_emissions(p, x)
    T, m = logp.shape
    with np.errstate(divide="ignore"):
        log_gamma = np.log(p.gamma)
        score = np.log(p.delta) + logp[0]
    back = np.zeros((T, m), dtype=np.int64)
    for t in range(1, T):
        cand = score[:, None] + log_gamma
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(m)] + logp[t]
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = int(np.argmax(score))
    for t in range(T - 2, -1, -1):
        path[t] = back[t + 1, path[t + 1]]
    return path


def infer_states(p: NaturalParams, x: ObservationSeq) -> StateInference:
    smooth = smoothing(p, x)
    return StateInference(smooth, local_decode(smooth), viterbi(p, x))


def default_support_cap(p: NaturalParams) -> int:
    """Support bound leaving negligible forecast tail mass."""
    top = float(np.max(p.lam))
    return int(np.ceil(top + 10.0 * np.sqrt(top)))


def forecast(p: NaturalParams, x: ObservationSeq, h: int,
             x_max: int | None = None) -> np.ndarray:
    """pmf of the observation h steps past the end of the data, on 0..x_max."""
    if h < 1:
        raise ValueError("forecast horizon must be >= 1")
    p = p.with_delta()
    if x_max is None:
        x_max = default_support_cap(p)
    fb = forward_backward(p, x)
    log_alpha_T = fb.log_alpha[-1]
    w = np.exp(log_alpha_T - log_alpha_T.max())
    phi = w / w.sum()
    state_probs = phi @ np.linalg.matrix_power(p.gamma, h)

    support = np.arange(x_max + 1)
    from .autodiff import log_factorial

    lf = np.array([log_factorial(int(v)) for v in support])
    logpmf = support[:, None] * np.log(p.lam)[None, :] - p.lam[None, :] - lf[:, None]
    return np.exp(logpmf) @ state_probs


def path_log_joint(p: NaturalParams, x: ObservationSeq, path: np.ndarray) -> float:
    """log P(states = path, observations) under the model."""
    p = p.with_delta()
    logp = _log_emissions(p, x)
    with np.errstate(divide="ignore"):
        log_gamma = np.log(p.gamma)
        out = np.log(p.delta[path[0]]) + logp[0, path[0]]
    for t in range(1, x.T):
        out += log_gamma[path[t - 1], path[t]] + logp[t, path[t]]
    return float(out)
