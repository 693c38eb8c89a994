import io
import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memflow.conv import (
    Grid,
    GridFn,
    conv_taylor_table,
    convolve,
    iterated_conv_table,
    conv_power_bound,
    conv_power_exponent,
    trapezoid_conv,
)
from memflow.errors import CapError, GridMismatchError, MemflowError, SmoothnessError
from memflow.kernel import MemoryKernel

from conftest import DECAY, EXP, GROW, ONE, POLY_EXP


def exp_entry(alpha, lam, j, t):
    return alpha**j * t ** (j - 1) * np.exp(lam * t) / math.factorial(j - 1)


def test_convolve_constants_gives_ramp():
    g = Grid(2.0, 200)
    one = GridFn.sample(g, np.ones_like)
    np.testing.assert_allclose(convolve(one, one).values, g.nodes, atol=1e-14)


def test_convolve_exponentials():
    g = Grid(1.0, 1000)
    e = GridFn.sample(g, np.exp)
    assert convolve(e, e).values[-1] == pytest.approx(math.e, abs=1e-5)


def test_convolve_with_zero():
    g = Grid(1.0, 100)
    out = convolve(GridFn.sample(g, np.exp), GridFn.sample(g, np.zeros_like))
    assert np.all(out.values == 0.0)


def test_convolve_grid_mismatch():
    with pytest.raises(GridMismatchError):
        convolve(GridFn.sample(Grid(1.0, 10), np.exp), GridFn.sample(Grid(1.0, 20), np.exp))


def test_trapezoid_conv_matches_direct_sum():
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=(2, 37))
    h = 0.1
    direct = np.zeros(37)
    for i in range(1, 37):
        prod = f[i::-1] * g[: i + 1]
        direct[i] = h * (prod.sum() - 0.5 * (prod[0] + prod[-1]))
    np.testing.assert_allclose(trapezoid_conv(f, g, h), direct, atol=1e-13)


def test_second_order_convergence():
    # entry (2, 0) of cos: (cos * cos)(t) = (t cos t + sin t) / 2
    errs = []
    for n in (200, 400, 800):
        g = Grid(2.0, n)
        c = GridFn.sample(g, np.cos)
        exact = (g.nodes * np.cos(g.nodes) + np.sin(g.nodes)) / 2
        errs.append(np.max(np.abs(convolve(c, c).values - exact)))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


@pytest.mark.parametrize("extrapolate", [False, True])
@pytest.mark.parametrize("alpha, lam", [(1.0, 0.8), (2.0, -0.5)])
def test_table_exponential_entries(alpha, lam, extrapolate):
    kern = MemoryKernel.exponential(alpha, lam)
    g = Grid(2.0, 2000)
    tab = iterated_conv_table(kern, 5, 2, g, extrapolate=extrapolate)
    for j in range(1, 6):
        exact = exp_entry(alpha, lam, j, g.nodes)
        err = np.max(np.abs(tab.entry(j, 0).values - exact)) / np.max(np.abs(exact))
        assert err <= 1e-6


def test_table_constant_kernel():
    g = Grid(2.0, 400)
    tab = iterated_conv_table(ONE, 6, 3, g)
    for j in range(1, 7):
        np.testing.assert_allclose(tab.entry(j, 0).values, g.nodes ** (j - 1) / math.factorial(j - 1), atol=1e-12)


def test_table_zero_pattern_at_origin():
    tab = iterated_conv_table(POLY_EXP, 4, 4, Grid(1.0, 100))
    assert tab.entry(3, 0).values[0] == 0.0
    for j in range(1, 5):
        for k in range(5):
            assert tab.data[j, k, 0] == pytest.approx(conv_taylor_table(POLY_EXP, 4, 4)[j, k], abs=1e-14)


def test_derivative_entries_match_closed_form():
    # d^k/dt^k of alpha^j t^{j-1} e^{lam t}/(j-1)! by Leibniz
    alpha, lam = 2.0, -0.5
    g = Grid(2.0, 2000)
    tab = iterated_conv_table(DECAY, 4, 5, g)
    t = g.nodes
    for j in range(1, 5):
        for k in range(6):
            exact = sum(
                math.comb(k, i) * lam ** (k - i) * math.perm(j - 1, i) * t ** (j - 1 - i) * (j - 1 - i >= 0)
                for i in range(min(k, j - 1) + 1)
            )
            exact = alpha**j * exact * np.exp(lam * t) / math.factorial(j - 1)
            np.testing.assert_allclose(tab.entry(j, k).values, exact, atol=1e-10)


def test_off_node_reads():
    g = Grid(2.0, 2000)
    tab = iterated_conv_table(GROW, 4, 10, g)
    tau = np.array([0.00037, 0.5123, 1.99951])
    vals = tab.at(0, tau)
    for j in range(1, 5):
        np.testing.assert_allclose(vals[j], exp_entry(1.0, 0.8, j, tau), rtol=1e-11, atol=1e-15)


def test_table_caps():
    g = Grid(1.0, 10)
    tab = iterated_conv_table(DECAY, 3, 2, g)
    with pytest.raises(CapError):
        tab.entry(4, 0)
    with pytest.raises(CapError):
        tab.entry(1, 3)
    with pytest.raises(SmoothnessError):
        iterated_conv_table(DECAY.with_smoothness(2), 3, 3, g)
    with pytest.raises(CapError):
        iterated_conv_table(DECAY, 100, 12, Grid(2.0, 100000))
    with pytest.raises(MemflowError):
        iterated_conv_table(DECAY, 0, 2, g)


def test_dump_csv():
    tab = iterated_conv_table(DECAY, 2, 1, Grid(1.0, 4))
    buf = io.StringIO()
    tab.dump_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "j,k,t,value"
    assert len(lines) == 1 + 2 * 2 * 5


def test_taylor_table_examples():
    tt = conv_taylor_table(MemoryKernel.exponential(1.5, 0.3), 4, 4)
    assert tt[2, 1] == pytest.approx(1.5**2)
    assert tt[2, 2] == pytest.approx(2 * 1.5**2 * 0.3)
    assert tt[3, 0] == 0.0 and tt[3, 1] == 0.0
    with pytest.raises(CapError):
        tt[5, 0]


@given(st.integers(1, 6), st.integers(0, 8), st.floats(-1.5, 1.5), st.floats(0.2, 3))
def test_taylor_table_exponential_closed_form(j, k, lam, alpha):
    # (alpha e^{lam t})^{*j} = alpha^j t^{j-1} e^{lam t}/(j-1)!, so its k-th derivative at 0 is
    # alpha^j C(k, j-1) lam^{k-j+1}
    tt = conv_taylor_table(MemoryKernel.exponential(alpha, lam), 6, 8)
    expect = alpha**j * math.comb(k, j - 1) * lam ** (k - j + 1) if k >= j - 1 else 0.0
    assert tt[j, k] == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_conv_power_bound_examples():
    assert conv_power_bound(EXP, 1, 0, 1.0) == pytest.approx(1.01 * math.e, rel=1e-12)
    assert conv_power_bound(DECAY, 2, 0, 0.0) == 0.0
    g = Grid(2.0, 400)
    tab = iterated_conv_table(DECAY, 2, 0, g)
    for i in range(0, 401, 20):
        assert abs(tab.data[2, 0, i]) <= conv_power_bound(DECAY, 2, 0, g.nodes[i])


def test_conv_power_exponent():
    assert conv_power_exponent(3, 0) == 0
    assert conv_power_exponent(3, 2) == 1
    assert conv_power_exponent(2, 5) == 4


@given(st.integers(1, 8), st.integers(0, 6), st.sampled_from([0, 100, 250, 399, 400]))
def test_conv_power_bound_holds(j, k, i):
    tab = _bound_table()
    t = tab.grid.nodes[i]
    assert abs(tab.data[j, k, i]) <= conv_power_bound(POLY_EXP, j, k, t) + 1e-14


@lru_cache(maxsize=None)
def _bound_table():
    return iterated_conv_table(POLY_EXP, 8, 6, Grid(2.0, 400))
