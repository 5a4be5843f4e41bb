import numpy as np
import pytest

from causalchain import simlearner as sl
from causalchain.estimands import AnalysisFrame, EstimandSpec
from causalchain.iv_estimators import IVFrame

# 8-unit fixture: binary confounder L, binary exposure A, outcome Y
F8 = np.array([
    (0, 0, 5), (0, 0, 7), (0, 1, 9), (0, 1, 11),
    (1, 0, 10), (1, 1, 16), (1, 1, 18), (1, 1, 20),
], dtype=float)

# binary instrument fixture: (Z, A, Y)
FIV = np.array([
    (1, 1, 12), (1, 1, 10), (1, 1, 11), (1, 0, 7),
    (0, 1, 10), (0, 0, 6), (0, 0, 7), (0, 0, 5),
], dtype=float)


def make_frame(y, a, L=None, labels=None, contrast="ATE", z=None):
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if L is None:
        L = np.empty((len(y), 0))
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    labels = labels or [f"L{j}" for j in range(L.shape[1])]
    spec = EstimandSpec(contrast, "A2", instrument="a1" if z is not None else None)
    return AnalysisFrame(spec, y, a, L, list(labels), np.ones(len(y), bool),
                         None if z is None else np.asarray(z, float))


@pytest.fixture
def f8():
    return make_frame(F8[:, 2], F8[:, 1], F8[:, 0], ["L"])


@pytest.fixture
def f8_att():
    return make_frame(F8[:, 2], F8[:, 1], F8[:, 0], ["L"], contrast="ATT")


@pytest.fixture
def fiv():
    return IVFrame(EstimandSpec("ATE", "A2", instrument="a1"), FIV[:, 2], FIV[:, 1], FIV[:, 0])


@pytest.fixture(scope="session")
def calibrated():
    """The calibrated default configuration at the analysis sample size, seed 1."""
    return sl.generate(sl.DGPConfig())
