import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from memflow.coeffs import h_series
from memflow.conv import Grid
from memflow.errors import EnvelopeError
from memflow.flowkernel import (
    FlowKernelEval,
    build_flow_kernel,
    envelope_tail_bound,
    km_eval,
    km_global_bound,
    km_partial,
    km_tail_bound,
    km_weighted_l1,
    sharp_tail_bound,
)
from memflow.kernel import ck_norm

from conftest import DECAY, EXP, ONE, POLY_EXP, UNIT_DECAY, bessel_flow_kernel, series_flow_kernel

T_GRID = np.linspace(0.0, 2.0, 21)


def test_vanishes_at_s_zero(fk_decay, fk_poly_exp):
    for fk in (fk_decay, fk_poly_exp):
        assert np.all(km_eval(fk, T_GRID, np.zeros_like(T_GRID)) == 0.0)


def test_constant_kernel_value(fk_one):
    # the direct series and the Bessel form agree; both give -J_1(1)
    assert series_flow_kernel(1.0, 0.5) == pytest.approx(bessel_flow_kernel(1.0, 0.5), abs=1e-15)
    assert km_eval(fk_one, 1.0, 0.5) == pytest.approx(-0.44005058574493355, abs=1e-6)


@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_constant_kernel_against_bessel(fk_one, t, frac):
    s = frac * t
    assert km_eval(fk_one, t, s) == pytest.approx(bessel_flow_kernel(t, s), abs=1e-10)


def test_diagonal_value_exp_kernel():
    fk = build_flow_kernel(EXP, T=1.0, n=1000)
    assert km_eval(fk, 1.0, 1.0) == pytest.approx(-1.0, abs=1e-12)


def test_beta_zero_alpha_zero_is_eval(fk_decay):
    t = np.array([0.3, 1.0, 2.0])
    s = np.array([0.1, 0.7, 1.3])
    np.testing.assert_array_equal(km_partial(fk_decay, 0, 0, t, s), km_eval(fk_decay, t, s))


def test_s_derivative_at_zero_is_minus_kernel(fk_decay, fk_poly_exp):
    for fk, kern in ((fk_decay, DECAY), (fk_poly_exp, POLY_EXP)):
        np.testing.assert_allclose(km_partial(fk, 0, 1, T_GRID, 0.0 * T_GRID), -kern(T_GRID), atol=1e-12)


def test_s_derivative_against_finite_difference_oracle(fk_one):
    d = 1e-5
    fd = (series_flow_kernel(1.0, 0.5 + d) - series_flow_kernel(1.0, 0.5 - d)) / (2 * d)
    assert km_partial(fk_one, 0, 1, 1.0, 0.5) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("alpha, beta", [(0, 1), (1, 0), (1, 1), (0, 2)])
def test_finite_difference_consistency(fk_poly_exp, alpha, beta):
    d = 1e-5
    for t, s in [(0.5, 0.2), (1.2, 0.6), (1.9, 1.1)]:
        exact = km_partial(fk_poly_exp, alpha, beta, t, s)
        if beta:
            fd = (km_partial(fk_poly_exp, alpha, beta - 1, t, s + d) - km_partial(fk_poly_exp, alpha, beta - 1, t, s - d)) / (2 * d)
        else:
            fd = (km_partial(fk_poly_exp, alpha - 1, beta, t + d, s) - km_partial(fk_poly_exp, alpha - 1, beta, t - d, s)) / (2 * d)
        assert abs(exact - fd) <= 1e-5 * max(1.0, abs(exact))


@pytest.mark.parametrize("beta", range(6))
def test_boundary_values_match_h(fk_decay, beta):
    h = h_series(DECAY, 6, Grid(2.0, 2500))
    np.testing.assert_allclose(km_partial(fk_decay, 0, beta, T_GRID, 0.0 * T_GRID), h[beta](T_GRID), atol=1e-8)


def test_envelope_checks(fk_decay):
    with pytest.raises(EnvelopeError):
        km_eval(fk_decay, 1.0, 1.5)
    with pytest.raises(EnvelopeError):
        km_eval(fk_decay, 2.5, 0.5)
    with pytest.raises(EnvelopeError):
        km_eval(fk_decay, 1.0, -0.1)
    with pytest.raises(EnvelopeError):
        km_partial(fk_decay, 5, 5, 1.0, 0.5)


def test_selected_truncation_is_certified(fk_decay, fk_poly_exp):
    for fk in (fk_decay, fk_poly_exp):
        assert fk.J <= 128
        assert envelope_tail_bound(fk.kernel, fk.order, fk.T, fk.J) <= fk.eps


@given(st.integers(0, 4), st.integers(0, 4), st.floats(0.05, 2.0), st.floats(0.0, 1.0), st.integers(2, 12))
def test_sharp_tail_bound_dominates_truncation(fk_poly_exp, alpha, beta, t, frac, J):
    s = frac * t
    short = FlowKernelEval(fk_poly_exp.kernel, fk_poly_exp.conv, J, fk_poly_exp.eps, fk_poly_exp.order)
    diff = abs(short.partial(alpha, beta, t, s) - fk_poly_exp.partial(alpha, beta, t, s))
    bound = sharp_tail_bound(POLY_EXP, alpha, beta, t, s, J)
    assert diff <= bound + 1e-9 * max(1.0, abs(fk_poly_exp.partial(alpha, beta, t, s)))


def test_km_tail_bound_examples(fk_unit_decay):
    assert km_tail_bound(fk_unit_decay, 0, 0, 1.0, 0.5, 20) <= 1e-12
    assert km_tail_bound(fk_unit_decay, 0, 0, 1.0, 0.5, 25) <= km_tail_bound(fk_unit_decay, 0, 0, 1.0, 0.5, 20)


def test_km_global_bound_examples():
    assert km_global_bound(UNIT_DECAY, 0, 0, 1.0, 0.5) == 0.0
    expect = math.e * math.expm1(ck_norm(UNIT_DECAY, 1, 1.0))
    assert km_global_bound(UNIT_DECAY, 0, 1, 1.0, 0.0) == pytest.approx(expect, rel=1e-14)
    vals = [km_global_bound(UNIT_DECAY, 1, b, 1.5, 0.5) for b in range(5)]
    assert vals == sorted(vals)


@given(st.integers(0, 3), st.integers(1, 4), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_global_bound_holds_for_positive_beta(fk_decay, alpha, beta, t, frac):
    if alpha + beta > 4:
        return
    s = frac * t
    assert abs(km_partial(fk_decay, alpha, beta, t, s)) <= km_global_bound(DECAY, alpha, beta, t, s) + fk_decay.eps


def test_weighted_l1_constant_kernel(fk_one):
    oracle = quad(lambda s: abs(bessel_flow_kernel(1.0, s)), 0, 1, epsabs=1e-13)[0]
    assert oracle == pytest.approx(1 - math.cos(1.0), abs=1e-12)
    res = km_weighted_l1(fk_one, 0.0, 1.0)
    assert res.value == pytest.approx(oracle, abs=1e-6)
    assert res.bound >= math.e - 1
    assert res.holds


def test_weighted_l1_slack(fk_unit_decay):
    res = km_weighted_l1(fk_unit_decay, 5.0, 2.0)
    assert res.value <= 0.9 * res.bound


def test_weighted_l1_small_t(fk_decay):
    assert km_weighted_l1(fk_decay, 1.0, 0.0).value == 0.0
    tiny = km_weighted_l1(fk_decay, 1.0, 1e-4)
    assert tiny.value < 1e-7 and tiny.bound < 1e-7 and tiny.holds
