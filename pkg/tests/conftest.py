import math

import numpy as np
import pytest

from qplab.cocycle import CocycleParams
from qplab.dynamics import MultiShift, SkewShift, Torus2Point, standard_frequencies
from qplab.potential import cosine_sum, cosine_x1, constant_series, gevrey_series

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2M1 = math.sqrt(2.0) - 1.0
SQRT3M1 = math.sqrt(3.0) - 1.0


@pytest.fixture(scope="session")
def skew_golden():
    return SkewShift(GOLDEN)


@pytest.fixture(scope="session")
def shift_pair():
    return MultiShift(SQRT2M1, SQRT3M1)


@pytest.fixture(scope="session")
def cos_sum():
    return cosine_sum()


@pytest.fixture(scope="session")
def cos_x1():
    return cosine_x1()


@pytest.fixture(scope="session")
def gevrey_corpus():
    return [
        gevrey_series(2.0, 1.0, degree=10),
        gevrey_series(2.0, 2.0, degree=10, seed=11),
        gevrey_series(3.0, 1.5, degree=8, seed=5),
    ]


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)


def make_params(v, t, coupling, energy):
    return CocycleParams(v, t, coupling, energy)
