import numpy as np
import pytest

from hmmfit.errors import NonFiniteEncountered
from hmmfit.optimize import (
    Mode,
    OptimizerConfig,
    Termination,
    fd_gradient,
    minimize,
)


def quadratic(c):
    def f(x):
        return float(np.sum((x - c) ** 2))

    def g(x):
        return 2.0 * (x - c)

    def h(x):
        return 2.0 * np.eye(c.size)

    return f, g, h


def test_newton_converges_in_one_step_on_quadratic():
    c = np.array([0.5, -0.3])
    f, g, h = quadratic(c)
    report = minimize(f, np.zeros(2), OptimizerConfig(mode=Mode.GRAD_HESS),
                      grad=g, hess=h)
    assert report.converged
    assert report.iterations == 1
    np.testing.assert_allclose(report.x_opt, c, atol=1e-12)


def rosenbrock(x):
    return float((1 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2)


def rosenbrock_grad(x):
    return np.array([
        -2.0 * (1 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
        200.0 * (x[1] - x[0] ** 2),
    ])


@pytest.mark.parametrize("mode", [Mode.NO_DERIV, Mode.GRAD])
def test_rosenbrock_classic_start(mode):
    report = minimize(rosenbrock, np.array([-1.2, 1.0]),
                      OptimizerConfig(mode=mode, max_iter=2000),
                      grad=rosenbrock_grad)
    np.testing.assert_allclose(report.x_opt, [1.0, 1.0], atol=1e-6)


def test_all_modes_agree_on_smooth_function():
    def f(x):
        return float(np.log(1 + x[0] ** 2) + (x[1] - 2) ** 2 + np.exp(0.1 * x[0]))

    def g(x):
        return np.array([
            2 * x[0] / (1 + x[0] ** 2) + 0.1 * np.exp(0.1 * x[0]),
            2 * (x[1] - 2),
        ])

    def h(x):
        d2 = 2 * (1 - x[0] ** 2) / (1 + x[0] ** 2) ** 2 + 0.01 * np.exp(0.1 * x[0])
        return np.array([[d2, 0.0], [0.0, 2.0]])

    optima = []
    for mode in Mode:
        report = minimize(f, np.array([1.5, -1.0]), OptimizerConfig(mode=mode),
                          grad=g, hess=h)
        optima.append(report.f_opt)
    assert max(optima) - min(optima) < 1e-8


def test_monotone_decrease_of_accepted_iterates():
    report = minimize(rosenbrock, np.array([-1.2, 1.0]),
                      OptimizerConfig(mode=Mode.GRAD, max_iter=2000),
                      grad=rosenbrock_grad, keep_trace=True)
    trace = np.array(report.trace)
    assert np.all(np.diff(trace) <= 0.0)


def test_max_iter_reported():
    f, g, h = quadratic(np.array([100.0, -40.0]))
    report = minimize(f, np.zeros(2), OptimizerConfig(mode=Mode.GRAD, max_iter=2),
                      grad=g)
    assert not report.converged
    assert report.termination is Termination.MAX_ITER
    assert report.iterations == 2


def test_nonfinite_start_raises():
    with pytest.raises(NonFiniteEncountered):
        minimize(lambda x: np.inf, np.zeros(1),
                 OptimizerConfig(mode=Mode.NO_DERIV))


def test_infinite_barrier_is_respected():
    # objective is finite only on x0 < 1; line search must reject beyond
    def f(x):
        if x[0] >= 1.0:
            return np.inf
        return float((x[0] - 0.9) ** 2 / (1 - x[0]))

    report = minimize(f, np.array([0.0]), OptimizerConfig(mode=Mode.NO_DERIV))
    assert report.x_opt[0] < 1.0
    assert report.f_opt < f(np.array([0.0]))


def test_fd_gradient_accuracy():
    g = fd_gradient(rosenbrock, np.array([-0.7, 0.3]))
    np.testing.assert_allclose(g, rosenbrock_grad(np.array([-0.7, 0.3])),
                               rtol=1e-6, atol=1e-6)


def test_zero_dimensional_problem_is_noop():
    report = minimize(lambda x: 3.5, np.empty(0), OptimizerConfig(mode=Mode.GRAD),
                      grad=lambda x: np.empty(0))
    assert report.converged
    assert report.f_opt == 3.5
    assert report.iterations == 0


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(max_iter=0)
    with pytest.raises(ValueError):
        OptimizerConfig(rel_tol=-1.0)
    cfg = OptimizerConfig(mode="grad")
    assert cfg.mode is Mode.GRAD


def test_grad_mode_requires_gradient():
    with pytest.raises(ValueError):
        minimize(rosenbrock, np.zeros(2), OptimizerConfig(mode=Mode.GRAD))
