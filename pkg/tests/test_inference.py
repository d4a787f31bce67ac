import numpy as np
import pytest

from hmmfit.autodiff import log_factorial
from hmmfit.inference import (
    default_support_cap,
    forecast,
    infer_states,
    local_decode,
    path_log_joint,
    smoothing,
    viterbi,
)
from hmmfit.params import NaturalParams, ObservationSeq, working_to_natural, WorkingParams


def random_model(rng, m):
    lam = np.sort(rng.uniform(0.3, 11.0, size=m))
    tau = rng.uniform(-2.5, 2.5, size=m * (m - 1))
    return working_to_natural(WorkingParams(m, np.log(lam), tau))


def all_paths(m, T):
    grids = np.meshgrid(*([np.arange(m)] * T), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def path_log_probs(p, x, paths):
    """Vectorized log joint probability of every path."""
    logp = np.array([[int(x.values[t]) * np.log(l) - l - log_factorial(int(x.values[t]))
                      for l in p.lam] for t in range(x.T)])
    logp[x.missing] = 0.0
    with np.errstate(divide="ignore"):
        lg = np.log(p.gamma)
        out = np.log(p.delta[paths[:, 0]]) + logp[0, paths[:, 0]]
    for t in range(1, x.T):
        out = out + lg[paths[:, t - 1], paths[:, t]] + logp[t, paths[:, t]]
    return out


def brute_posterior(p, x):
    paths = all_paths(p.m, x.T)
    w = np.exp(path_log_probs(p, x, paths))
    post = np.zeros((x.T, p.m))
    for t in range(x.T):
        for s in range(p.m):
            post[t, s] = w[paths[:, t] == s].sum()
    return post / w.sum()


def test_smoothing_rows_sum_to_one():
    rng = np.random.default_rng(0)
    p = random_model(rng, 3)
    x = ObservationSeq(rng.integers(0, 10, size=50), np.zeros(50, bool))
    sm = smoothing(p, x)
    np.testing.assert_allclose(sm.sum(axis=1), 1.0, atol=1e-10)


def test_single_state_smoothing_is_one():
    p = NaturalParams(1, [2.0], [[1.0]]).with_delta()
    x = ObservationSeq.from_iterable([1, 2, 3])
    np.testing.assert_array_equal(smoothing(p, x), np.ones((3, 1)))


def test_smoothing_matches_exhaustive_posterior():
    rng = np.random.default_rng(1)
    p = random_model(rng, 2).with_delta()
    x = ObservationSeq(rng.integers(0, 9, size=6), np.zeros(6, bool))
    np.testing.assert_allclose(smoothing(p, x), brute_posterior(p, x), atol=1e-10)


def test_viterbi_single_observation():
    p = NaturalParams(2, [1.0, 6.0], [[0.9, 0.1], [0.2, 0.8]]).with_delta()
    x = ObservationSeq.from_iterable([7])
    expect = int(np.argmax(p.delta * np.array(
        [np.exp(7 * np.log(l) - l - log_factorial(7)) for l in p.lam])))
    assert viterbi(p, x).tolist() == [expect]


def test_viterbi_matches_exhaustive_argmax():
    rng = np.random.default_rng(2)
    p = random_model(rng, 3).with_delta()
    x = ObservationSeq(rng.integers(0, 9, size=8), np.zeros(8, bool))
    paths = all_paths(3, 8)
    best = paths[np.argmax(path_log_probs(p, x, paths))]
    np.testing.assert_array_equal(viterbi(p, x), best)


def test_viterbi_dominates_local_decoding():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = int(rng.integers(2, 4))
        p = random_model(rng, m).with_delta()
        T = int(rng.integers(2, 30))
        x = ObservationSeq(rng.integers(0, 12, size=T), np.zeros(T, bool))
        inf = infer_states(p, x)
        lj_vit = path_log_joint(p, x, inf.viterbi_path)
        lj_loc = path_log_joint(p, x, inf.local_path)
        assert lj_vit >= lj_loc - 1e-12


def test_local_decode_tie_breaks_low():
    sm = np.full((4, 3), 1.0 / 3.0)
    np.testing.assert_array_equal(local_decode(sm), np.zeros(4, dtype=int))


def test_local_decode_matches_brute_marginal():
    rng = np.random.default_rng(4)
    p = random_model(rng, 2).with_delta()
    x = ObservationSeq(rng.integers(0, 8, size=6), np.zeros(6, bool))
    brute = brute_posterior(p, x)
    np.testing.assert_array_equal(local_decode(smoothing(p, x)),
                                  np.argmax(brute, axis=1))


def test_forecast_mass_and_cap():
    rng = np.random.default_rng(5)
    p = random_model(rng, 2).with_delta()
    x = ObservationSeq(rng.integers(0, 9, size=30), np.zeros(30, bool))
    pmf = forecast(p, x, h=1)
    assert pmf.sum() >= 1.0 - 1e-8
    assert pmf.size == default_support_cap(p) + 1


def test_forecast_long_horizon_reaches_stationary_mixture(tyt_fit):
    p = tyt_fit.params
    x = tyt_fit.objective.x
    pmf = forecast(p, x, h=400)
    support = np.arange(pmf.size)
    lf = np.array([log_factorial(int(k)) for k in support])
    mix = np.zeros(pmf.size)
    for lam, d in zip(p.lam, p.delta):
        mix += d * np.exp(support * np.log(lam) - lam - lf)
    np.testing.assert_allclose(pmf, mix, atol=1e-8)


def test_forecast_two_step_matches_brute_force():
    rng = np.random.default_rng(6)
    p = random_model(rng, 2).with_delta()
    x = ObservationSeq(rng.integers(0, 8, size=5), np.zeros(5, bool))
    paths = all_paths(2, 5)
    w = np.exp(path_log_probs(p, x, paths))
    term = np.zeros(2)
    for s in range(2):
        term[s] = w[paths[:, -1] == s].sum()
    term /= w.sum()
    state_probs = term @ np.linalg.matrix_power(p.gamma, 2)
    cap = 25
    lf = np.array([log_factorial(k) for k in range(cap + 1)])
    pm = np.exp(np.arange(cap + 1)[:, None] * np.log(p.lam)[None, :]
                - p.lam[None, :] - lf[:, None])
    np.testing.assert_allclose(forecast(p, x, 2, cap), pm @ state_probs, atol=1e-10)


def test_forecast_one_step_consistency():
    rng = np.random.default_rng(7)
    p = random_model(rng, 3).with_delta()
    x = ObservationSeq(rng.integers(0, 10, size=40), np.zeros(40, bool))
    from hmmfit.likelihood import forward_backward

    fb = forward_backward(p, x)
    la = fb.log_alpha[-1]
    phi = np.exp(la - la.max())
    phi /= phi.sum()
    onestep = phi @ p.gamma
    cap = 20
    lf = np.array([log_factorial(k) for k in range(cap + 1)])
    pm = np.exp(np.arange(cap + 1)[:, None] * np.log(p.lam)[None, :]
                - p.lam[None, :] - lf[:, None])
    np.testing.assert_allclose(forecast(p, x, 1, cap), pm @ onestep, atol=1e-12)


def test_forecast_rejects_bad_horizon(tyt_fit):
    with pytest.raises(ValueError):
        forecast(tyt_fit.params, tyt_fit.objective.x, 0)


def test_smoothing_with_missing_observations():
    p = NaturalParams(2, [1.0, 6.0], [[0.9, 0.1], [0.2, 0.8]]).with_delta()
    x = ObservationSeq.from_iterable([0, None, 7])
    sm = smoothing(p, x)
    np.testing.assert_allclose(sm.sum(axis=1), 1.0, atol=1e-12)
    brute = brute_posterior(p, x)
    np.testing.assert_allclose(sm, brute, atol=1e-10)
