import numpy as np
import pytest

from hmmfit.data import tyt_dataset
from hmmfit.model import fit, make_objective
from hmmfit.optimize import Mode, OptimizerConfig
from hmmfit.params import NaturalParams, natural_to_working

# Reference values for the 87-day TYT series, 2-state model.
TYT_INIT_LAMBDA = np.array([1.0, 3.0])
TYT_INIT_GAMMA = np.array([[0.8, 0.2], [0.2, 0.8]])
TYT_INIT_WORKING = np.array([0.0, 1.098612, -1.386294, -1.386294])
TYT_INIT_NLL = 228.3552
TYT_INIT_GRAD = np.array([-3.60306, -146.0336, 10.52832, -1.031706])
TYT_INIT_HESS = np.array([
    [1.902009, -5.877900, -1.3799682, 2.4054017],
    [-5.877900, 188.088247, -4.8501589, 2.3434284],
    [-1.379968, -4.850159, 9.6066700, -0.8410438],
    [2.405402, 2.343428, -0.8410438, 0.7984216],
])
TYT_OPT_NLL = 168.536055869
TYT_ESTIMATES = {
    "lambda1": 1.63641070, "lambda2": 5.53309626,
    "gamma11": 0.94980192, "gamma21": 0.02592209,
    "gamma12": 0.05019808, "gamma22": 0.97407791,
    "delta1": 0.34054163, "delta2": 0.65945837,
}
TYT_STD_ERRORS = {
    "lambda1": 0.27758294, "lambda2": 0.31876141,
    "gamma11": 0.04374682, "gamma21": 0.02088689,
    "gamma12": 0.04374682, "gamma22": 0.02088689,
    "delta1": 0.23056401, "delta2": 0.23056401,
}
TYT_FIXED_LAMBDA1 = {
    "lambda1": (1.0, 0.0), "lambda2": (5.50164872, 0.30963641),
    "gamma11": (0.94561055, 0.04791050), "gamma21": (0.02655944, 0.02133283),
    "gamma12": (0.05438945, 0.04791050), "gamma22": (0.97344056, 0.02133283),
    "delta1": (0.32810136, 0.22314460), "delta2": (0.67189864, 0.22314460),
}


@pytest.fixture(scope="session")
def tyt():
    return tyt_dataset()


@pytest.fixture(scope="session")
def tyt_start():
    return natural_to_working(NaturalParams(2, TYT_INIT_LAMBDA, TYT_INIT_GAMMA))


@pytest.fixture(scope="session")
def tyt_fit(tyt, tyt_start):
    result = fit(make_objective(tyt, 2, tyt_start),
                 OptimizerConfig(mode=Mode.GRAD_HESS))
    assert result.converged
    return result
