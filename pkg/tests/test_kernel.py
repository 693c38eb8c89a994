import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memflow.errors import KernelParseError, MemflowError, SmoothnessError
from memflow.kernel import MemoryKernel, Term, ck_norm, eval_deriv, format_terms, parse_terms, taylor_at_zero

from conftest import DECAY, EXP, POLY_EXP, SINE, UNIT_DECAY


def test_derivatives_of_exp_at_zero():
    assert eval_deriv(EXP, 3, 0.0) == 1.0


def test_first_derivative_of_decay():
    assert eval_deriv(DECAY, 1, 0.0) == -1.0


def test_second_derivative_of_t2_exp():
    assert eval_deriv(POLY_EXP, 2, 0.0) == pytest.approx(2.0, abs=1e-14)


def test_taylor_values():
    k = MemoryKernel.exponential(1.7, -0.3)
    for i in range(6):
        assert taylor_at_zero(k, i) == pytest.approx(1.7 * (-0.3) ** i, rel=1e-14)
    assert taylor_at_zero(SINE, 0) == 0.0
    assert taylor_at_zero(POLY_EXP, 0) == 0.0
    assert taylor_at_zero(POLY_EXP, 1) == 0.0


def test_derivative_matches_symbolic_form():
    # d^k/dt^k [t^2 e^t] = (t^2 + 2kt + k(k-1)) e^t
    t = np.linspace(0, 2, 11)
    for k in range(6):
        expect = (t**2 + 2 * k * t + k * (k - 1)) * np.exp(t)
        np.testing.assert_allclose(POLY_EXP.deriv(k, t), expect, rtol=1e-13)


def test_oscillating_term_derivatives():
    t = np.linspace(0, 3, 7)
    k = MemoryKernel.from_spec("1*t^0*exp(-0.2)*cos(3)")
    expect = np.exp(-0.2 * t) * (-0.2 * np.cos(3 * t) - 3 * np.sin(3 * t))
    np.testing.assert_allclose(k.deriv(1, t), expect, rtol=1e-13, atol=1e-15)


def test_ck_norm_examples():
    assert ck_norm(EXP, 0, 1.0) == pytest.approx(1.01 * math.e, rel=1e-12)
    assert ck_norm(UNIT_DECAY, 0, 2.0) == pytest.approx(1.01, rel=1e-12)
    assert ck_norm(DECAY, 1, 1.0) == pytest.approx(3.03, rel=1e-12)


def test_smoothness_cap_rejects_higher_orders():
    k = DECAY.with_smoothness(3)
    k.deriv(3, 0.5)
    with pytest.raises(SmoothnessError):
        k.deriv(4, 0.5)
    with pytest.raises(SmoothnessError):
        ck_norm(k, 4, 1.0)


def test_negative_time_rejected():
    with pytest.raises(MemflowError):
        DECAY(-0.1)


def test_zero_kernel_rejected():
    with pytest.raises(MemflowError):
        MemoryKernel((Term(0.0),))
    with pytest.raises(MemflowError):
        MemoryKernel.from_spec("1*t^0*exp(0.5); -1*t^0*exp(0.5)")


def test_sine_kernel_is_nonzero():
    assert SINE(math.pi / 2) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "text, column",
    [("2*t^", 5), ("*t^0*exp(1)", 1), ("2*t^0*exp(1", 12), ("2*t^0*exp(1) x", 14), ("2*t^0*exp(1)*sin()", 18)],
)
def test_parse_errors_report_column(text, column):
    with pytest.raises(KernelParseError) as info:
        parse_terms(text)
    assert info.value.column == column
    assert f"column {column}" in str(info.value)


def test_parse_sum_of_terms():
    k = MemoryKernel.from_spec("2*t^0*exp(-0.5); 1*t^1*exp(0)*cos(2)")
    t = 0.7
    assert k(t) == pytest.approx(2 * math.exp(-0.35) + t * math.cos(1.4), rel=1e-14)


finite = st.floats(-3, 3, allow_nan=False).filter(lambda x: abs(x) > 1e-3)


@given(
    st.lists(
        st.tuples(finite, st.integers(0, 3), st.floats(-2, 2), st.sampled_from(["none", "cos", "sin"]), st.floats(0.1, 4)),
        min_size=1,
        max_size=3,
    )
)
def test_spec_round_trip(raw):
    terms = tuple(Term(c, m, r, o, f if o != "none" else 0.0) for c, m, r, o, f in raw)
    assert parse_terms(format_terms(terms)) == terms


@given(st.floats(-2, 2), st.floats(0.1, 3), st.integers(0, 8), st.floats(0, 2))
def test_exponential_derivative_closed_form(lam, alpha, k, t):
    kern = MemoryKernel.exponential(alpha, lam)
    assert kern.deriv(k, t) == pytest.approx(alpha * lam**k * math.exp(lam * t), rel=1e-12, abs=1e-300)


@given(st.integers(0, 4), st.floats(0.1, 3))
def test_ck_norm_dominates_samples(k, T):
    t = np.linspace(0, T, 97)
    total = sum(np.max(np.abs(POLY_EXP.deriv(i, t))) for i in range(k + 1))
    assert ck_norm(POLY_EXP, k, T) >= total
