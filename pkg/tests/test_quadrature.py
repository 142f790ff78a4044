import math

import numpy as np
import pytest

from lgasym.quadrature import (BudgetExceededError, DivergenceError,
                               integrate_finite, integrate_to_infinity,
                               l1_tail_norm)


def test_log_two():
    res = integrate_finite(lambda x: 1.0 / x, 1.0, 2.0, tol=1e-13)
    assert abs(res.value - math.log(2.0)) < 1e-13
    assert res.error_estimate < 1e-12
    assert res.evaluations >= 15


def test_polynomials_exact():
    # a single 15-point cell integrates polynomials up to degree 22 exactly
    for deg in (3, 7, 13, 19, 22):
        res = integrate_finite(lambda x, d=deg: x ** d, 0.0, 1.0, tol=1e-12)
        want = 1.0 / (deg + 1)
        assert res.value == pytest.approx(want, rel=5e-15, abs=1e-15)


def test_oscillatory_value():
    res = integrate_finite(np.sin, 0.0, 20.0, tol=1e-12)
    assert res.value == pytest.approx(1.0 - math.cos(20.0), abs=1e-11)


def test_reversed_endpoints_flip_sign():
    fwd = integrate_finite(lambda x: x ** 2, 0.0, 2.0, tol=1e-12)
    rev = integrate_finite(lambda x: x ** 2, 2.0, 0.0, tol=1e-12)
    assert rev.value == pytest.approx(-fwd.value, rel=1e-14)


def test_additivity():
    def fn(x):
        return np.exp(-x) * np.sin(3.0 * x)

    whole = integrate_finite(fn, 0.0, 5.0, tol=1e-12).value
    parts = (integrate_finite(fn, 0.0, 1.7, tol=1e-12).value
             + integrate_finite(fn, 1.7, 5.0, tol=1e-12).value)
    assert whole == pytest.approx(parts, abs=2e-12)


def test_left_endpoint_singularity():
    res = integrate_finite(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0,
                           tol=1e-12, singular="left")
    assert res.value == pytest.approx(2.0, abs=1e-11)


def test_right_endpoint_singularity():
    res = integrate_finite(lambda x: 1.0 / np.sqrt(1.0 - x), 0.0, 1.0,
                           tol=1e-12, singular="right")
    assert res.value == pytest.approx(2.0, abs=1e-11)


def test_error_estimate_is_honest():
    cases = [
        (lambda x: np.exp(-x * x), 0.0, 3.0, 0.5 * math.sqrt(math.pi)
         * math.erf(3.0)),
        (lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, math.pi / 4.0),
        (lambda x: np.log(1.0 + x), 0.0, 1.0, 2.0 * math.log(2.0) - 1.0),
    ]
    for fn, a, b, want in cases:
        for tol in (1e-6, 1e-10):
            res = integrate_finite(fn, a, b, tol=tol)
            assert abs(res.value - want) <= max(res.error_estimate, tol)


def test_improper_exponential():
    res = integrate_to_infinity(lambda x: np.exp(-x), 0.0, tol=1e-12)
    assert res.value == pytest.approx(1.0, abs=1e-11)


def test_improper_gaussian():
    res = integrate_to_infinity(lambda x: np.exp(-x * x), 0.0, tol=1e-12)
    assert res.value == pytest.approx(0.5 * math.sqrt(math.pi), abs=1e-11)


def test_improper_power():
    res = integrate_to_infinity(lambda x: x ** -2.0, 1.0, tol=1e-12)
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_divergent_tail_raises():
    with pytest.raises(DivergenceError):
        integrate_to_infinity(lambda x: 1.0 / x, 1.0, tol=1e-10)


def test_divergent_weighted_tail_raises():
    # the algebraic-regime hypothesis integral for g = 2/x^2
    with pytest.raises(DivergenceError):
        integrate_to_infinity(lambda x: x * (2.0 / x ** 2), 1.0, tol=1e-10)


def test_budget_exceeded():
    # genuinely hard integrand, absurdly small budget
    with pytest.raises(BudgetExceededError):
        integrate_finite(lambda x: np.sin(1000.0 * x), 0.0, 20.0,
                         tol=1e-13, budget=200)


def test_l1_tail_norm_absolute_value():
    # int_0^inf e^{-x} |sin x| dx = (1/2) coth(pi/2)
    res = l1_tail_norm(lambda x: np.exp(-x) * np.sin(x), 0.0, tol=1e-11)
    want = 0.5 * math.cosh(math.pi / 2.0) / math.sinh(math.pi / 2.0)
    assert res.value == pytest.approx(want, abs=1e-9)
    assert res.value > 0.5   # strictly larger than the signed integral


def test_l1_tail_norm_divergence_propagates():
    with pytest.raises(DivergenceError):
        l1_tail_norm(lambda x: 1.0 / x, 1.0, tol=1e-8)


def test_zero_width_interval():
    res = integrate_finite(np.exp, 2.0, 2.0)
    assert res.value == 0.0 and res.evaluations == 0
