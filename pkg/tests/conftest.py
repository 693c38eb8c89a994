import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.special import j1

from memflow.coeffs import coeff_series
from memflow.conv import Grid
from memflow.flowkernel import build_flow_kernel
from memflow.kernel import MemoryKernel

settings.register_profile(
    "memflow",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("memflow")

ONE = MemoryKernel.constant(1.0)
DECAY = MemoryKernel.exponential(2.0, -0.5)
UNIT_DECAY = MemoryKernel.exponential(1.0, -1.0)
GROW = MemoryKernel.exponential(1.0, 0.8)
EXP = MemoryKernel.exponential(1.0, 1.0)
POLY_EXP = MemoryKernel.from_spec("1*t^2*exp(1)")
SINE = MemoryKernel.from_spec("1*t^0*exp(0)*sin(1)")


def bessel_flow_kernel(t, s):
    """Flow kernel of ``M = 1``: ``-sqrt(s/tau) J_1(2 sqrt(s tau))`` with ``tau = t - s``."""
    t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    tau = t - s
    out = np.where(tau > 0, -np.sqrt(s / np.where(tau > 0, tau, 1.0)) * j1(2 * np.sqrt(s * tau)), -s)
    return float(out) if out.ndim == 0 else out


def series_flow_kernel(t, s, terms=30):
    """Direct sum of ``(-s)^j (t-s)^{j-1} / (j! (j-1)!)`` for ``M = 1``."""
    tau = t - s
    return sum((-s) ** j * tau ** (j - 1) / (math.factorial(j) * math.factorial(j - 1)) for j in range(1, terms + 1))


@pytest.fixture(scope="session")
def fk_one():
    return build_flow_kernel(ONE)


@pytest.fixture(scope="session")
def fk_decay():
    return build_flow_kernel(DECAY)


@pytest.fixture(scope="session")
def fk_unit_decay():
    return build_flow_kernel(UNIT_DECAY)


@pytest.fixture(scope="session")
def fk_grow():
    return build_flow_kernel(GROW)


@pytest.fixture(scope="session")
def fk_poly_exp():
    return build_flow_kernel(POLY_EXP)


@pytest.fixture(scope="session")
def cs_decay():
    return coeff_series(DECAY, 6, Grid(2.0, 2500))
