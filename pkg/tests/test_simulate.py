import numpy as np
import pytest

from hmmfit.optimize import Mode
from hmmfit.params import NaturalParams
from hmmfit.simulate import (
    PRESETS,
    BenchResult,
    bench,
    simulate_accepted,
    simulate_hmm,
    visits_all_states,
)


def test_presets_match_reference_matrices():
    sim2 = PRESETS["sim2"]
    np.testing.assert_array_equal(sim2.lam, [1.0, 7.0])
    np.testing.assert_array_equal(sim2.gamma, [[0.95, 0.05], [0.15, 0.85]])
    sim3 = PRESETS["sim3"]
    np.testing.assert_array_equal(sim3.lam, [1.0, 4.0, 7.0])
    np.testing.assert_array_equal(np.diag(sim3.gamma), [0.95, 0.90, 0.85])
    sim4 = PRESETS["sim4"]
    np.testing.assert_array_equal(sim4.lam, [1.0, 5.0, 9.0, 13.0])
    np.testing.assert_array_equal(np.diag(sim4.gamma), [0.85, 0.85, 0.80, 0.90])
    np.testing.assert_array_equal(sim4.gamma[3], [0.034, 0.033, 0.033, 0.90])


def test_single_state_law_of_large_numbers():
    truth = NaturalParams(1, [4.0], [[1.0]])
    x, states = simulate_hmm(truth, 100_000, rng_seed=0)
    assert np.all(states == 0)
    assert x.values.mean() == pytest.approx(4.0, abs=0.05)


def test_state_occupancy_matches_stationary_distribution():
    x, states = simulate_hmm(PRESETS["sim2"], 100_000, rng_seed=1)
    occ = np.bincount(states, minlength=2) / states.size
    np.testing.assert_allclose(occ, [0.75, 0.25], atol=0.02)


def test_same_seed_reproduces_sequence():
    a, sa = simulate_hmm(PRESETS["sim3"], 500, rng_seed=7)
    b, sb = simulate_hmm(PRESETS["sim3"], 500, rng_seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(sa, sb)
    c, _ = simulate_hmm(PRESETS["sim3"], 500, rng_seed=8)
    assert not np.array_equal(a.values, c.values)


def test_counts_are_poisson_means():
    x, states = simulate_hmm(PRESETS["sim2"], 50_000, rng_seed=3)
    for s, lam in enumerate(PRESETS["sim2"].lam):
        assert x.values[states == s].mean() == pytest.approx(lam, rel=0.05)


def test_simulate_accepted_visits_all_states():
    # highly persistent short chains frequently miss a state
    truth = NaturalParams(2, [1.0, 9.0], [[0.995, 0.005], [0.02, 0.98]])
    for rep in range(5):
        _, states, rejected = simulate_accepted(truth, 30, (0, rep))
        assert visits_all_states(states, 2)
        assert rejected >= 0


def test_bench_orders_and_baseline(tyt):
    out = bench(tyt, 2, modes=[Mode.NO_DERIV, Mode.GRAD, Mode.GRAD_HESS],
                n_reps=8, rng_seed=0)
    assert isinstance(out, BenchResult)
    assert out.baseline is Mode.NO_DERIV
    np.testing.assert_array_equal(out.ratios[Mode.NO_DERIV], (1.0, 1.0, 1.0))
    for mode in (Mode.GRAD, Mode.GRAD_HESS):
        assert out.ratios[mode][0] > 0
    gh = out.per_mode[Mode.GRAD_HESS]
    gr = out.per_mode[Mode.GRAD]
    assert gh.mean_iterations < gr.mean_iterations
    lo, hi = gh.iterations_interval
    assert lo <= gh.mean_iterations <= hi


def test_bench_iteration_interval_is_order_statistic(tyt):
    out = bench(tyt, 2, modes=[Mode.GRAD_HESS], n_reps=10, rng_seed=4)
    mb = out.per_mode[Mode.GRAD_HESS]
    lo, hi = np.quantile(mb.iterations, [0.025, 0.975])
    assert mb.iterations_interval == (pytest.approx(lo), pytest.approx(hi))


def test_bench_rejects_single_rep(tyt):
    with pytest.raises(ValueError):
        bench(tyt, 2, n_reps=1)
