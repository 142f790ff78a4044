import math

import numpy as np
import pytest

from lgasym import expr
from lgasym.oracle import BesselFixture, small_argument_series
from lgasym.pipeline import AnalysisError, RangeError, analyze
from lgasym.transform import HypothesisFailed, Regime


def wronskian(r, lbl1, lbl2, x):
    a, b = r.solution(lbl1), r.solution(lbl2)
    return a.value(x) * b.derivative(x) - a.derivative(x) * b.value(x)


# ------------------------------------------------------ exponential

def test_pure_exponential_closed_form():
    r = analyze("1", "0")
    assert r.regime is Regime.CONSTANT_EXP
    dom, rec = r.solution("dominant"), r.solution("recessive")
    for x in (2.0, 5.0, 9.0):
        assert dom.value(x) * math.exp(-x) == pytest.approx(1.0, rel=1e-9)
        assert rec.value(x) * math.exp(x) == pytest.approx(1.0, rel=1e-9)
        assert rec.derivative(x) * math.exp(x) == pytest.approx(-1.0, rel=1e-9)


def test_exponential_connection_constant():
    r = analyze("1", "3/(4*x^2)")
    assert r.regime is Regime.CONSTANT_EXP
    assert r.constants["z_infinity"] == pytest.approx(1.354431383098691,
                                                      rel=1e-10)
    assert r.constants["tail_residual_bound"] <= 1e-6
    assert r.march["cutoff"] == pytest.approx(1.203125, rel=1e-12)
    assert r.certificate.passed()
    assert r.verification["tail_consistent"]


def test_exponential_wronskian_is_exact():
    r = analyze("1", "3/(4*x^2)")
    for x in (3.0, 20.0, 150.0):
        assert wronskian(r, "dominant", "recessive", x) == pytest.approx(
            -2.0, rel=1e-9)


# ------------------------------------------------------- oscillatory

def test_oscillatory_connection_constants():
    r = analyze("-1", "-1/(4*x^2)")
    assert r.regime is Regime.CONSTANT_OSC
    xi1 = r.constants["xi1"]
    xi2 = r.constants["xi2"]
    assert xi1 == pytest.approx(0.9933039792676156 + 0.12304556658121753j,
                                rel=1e-9)
    assert xi2 == pytest.approx(0.03271385701835617 - 0.02688777142245019j,
                                rel=1e-8)
    # complex-conjugate structure of the real equation is exact
    assert r.constants["conjugation_defect"] == 0.0
    assert r.constants["eta2"] == xi1.conjugate()
    # |xi1|^2 - |xi2|^2 = 1 for the unimodular transfer of a real potential
    assert abs(xi1) ** 2 - abs(xi2) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_oscillatory_wronskian():
    r = analyze("-1", "-1/(4*x^2)")
    for x in (3.0, 40.0):
        assert wronskian(r, "cos-like", "sin-like", x) == pytest.approx(
            1.0, abs=2e-6)


# --------------------------------------------------------- algebraic

def test_algebraic_regime():
    r = analyze("0", "exp(-2*x)")
    assert r.regime is Regime.ALGEBRAIC_INFINITY
    assert r.constants["z_infinity"] == pytest.approx(1.102939923179678,
                                                      rel=1e-10)
    assert wronskian(r, "dominant", "recessive", 10.0) == pytest.approx(
        -1.0, rel=1e-9)
    assert r.solution("recessive").value(10.0) == pytest.approx(1.0, abs=1e-6)


def test_algebraic_forced_range():
    r = analyze("0", "exp(-2*x)", x_max=60.0)
    assert r.march["x_max"] >= 60.0
    u1 = r.solution("dominant")
    # u1(x)/x -> 1 with O(1/x) drift from the a + b/x correction
    assert u1.value(59.0) / 59.0 == pytest.approx(1.0, abs=5e-3)
    assert u1.value(59.0) / 59.0 == pytest.approx(0.997349449, rel=1e-7)


# ------------------------------------------------------ zero endpoint

def test_zero_endpoint_closed_form_anchor():
    # for f = 1/x^2, g = 1 - 1/(4x^2) at zero the connection constant is
    # exactly I_0(1): solve the 2x2 matching system at the cutoff s = 1
    # in the inverted frame and apply I_0 K_1 + I_1 K_0 = 1/y
    r = analyze("1/x^2", "1 - 1/(4*x^2)", endpoint="zero", x_max=5e-4)
    i0 = small_argument_series(BesselFixture("I", 0.0), 1.0, bound_tol=1e-14)
    assert r.constants["z_infinity"] == pytest.approx(i0, rel=1e-11)
    assert r.constants["z_infinity"] == pytest.approx(1.266065877753067,
                                                      rel=1e-12)


def test_zero_endpoint_solutions():
    r = analyze("1/x^2", "1 - 1/(4*x^2)", endpoint="zero", x_max=5e-4)
    assert r.regime is Regime.EXP_SINGULAR
    labels = [s.label for s in r.solutions]
    assert labels == ["dominant-at-zero", "recessive-at-zero"]
    assert r.march["frame"] == "inverted (s = 1/x)"
    assert r.march["x_min"] <= 5.1e-4
    assert wronskian(r, "dominant-at-zero", "recessive-at-zero",
                     1e-3) == pytest.approx(2.0, rel=1e-9)
    # recessive branch has the sqrt(x) I_1(x) profile ~ x^{3/2}/2 with the
    # package normalization u2 -> x^{3/2}
    u2 = r.solution("recessive-at-zero")
    assert u2.value(1e-3) / 1e-3 ** 1.5 == pytest.approx(1.0, abs=1e-5)


# ----------------------------------------------------------- rejection

def test_analyze_rejects_bad_hypotheses():
    with pytest.raises(HypothesisFailed):
        analyze("1", "1/x")
    with pytest.raises(HypothesisFailed):
        analyze("0", "2/x^2", endpoint="zero")
    with pytest.raises(ValueError):
        analyze("1", "0", endpoint="sideways")
    with pytest.raises(expr.ParseError):
        analyze("1", "foo(x)")


# ---------------------------------------------------------- evaluation

def test_solution_range_guard():
    r = analyze("1", "3/(4*x^2)")
    rec = r.solution("recessive")
    hi = r.march["x_max"]
    with pytest.raises(RangeError) as exc:
        rec.value(hi * 2.0)
    assert "--xmax" in str(exc.value)
    with pytest.raises(RangeError):
        rec.value(r.march["cutoff"] * 0.5)


def test_sample_rows():
    r = analyze("1", "3/(4*x^2)")
    rows = r.sample_rows(9)
    assert len(rows) == 9
    xs = [row["x"] for row in rows]
    assert xs == sorted(xs)
    env = [row["envelope_bound"] for row in rows]
    assert all(b >= a - 1e-15 for a, b in zip(env[1:], env[:-1]))
    # the ratio tightens toward the endpoint and stays inside the envelope
    assert abs(rows[-1]["ratio"] - 1.0) < abs(rows[0]["ratio"] - 1.0)
    for row in rows:
        assert abs(row["ratio"] - 1.0) <= row["envelope_bound"] * (1 + 1e-6)
        assert set(row) == {"x", "value", "approximant", "ratio",
                            "envelope_bound"}


# -------------------------------------------------------- determinism

def test_reports_are_deterministic():
    r1 = analyze("1", "3/(4*x^2)")
    r2 = analyze("1", "3/(4*x^2)")
    assert r1.to_json_dict() == r2.to_json_dict()
    assert r1.work == r2.work
    assert r1.work["march_steps"] > 0
    assert r1.work["quadrature_evaluations"] > 0


def test_json_dict_shape():
    r = analyze("-1", "-1/(4*x^2)")
    d = r.to_json_dict()
    assert d["schema"] == 1
    assert d["regime"] == "constant-oscillatory"
    assert d["input"]["f"] == "-1"
    assert isinstance(d["constants"]["xi1"], dict)
    assert set(d["constants"]["xi1"]) == {"re", "im"}
    for sol in d["solutions"]:
        assert set(sol) == {"label", "asymptotic"}
    assert set(d["work"]) == {"quadrature_evaluations", "march_steps",
                              "map_nodes"}


# ------------------------------------------------------------ controls

def test_step_override():
    # the requested step is snapped so a whole number of cells covers the
    # phase span, so expect it only to ~span/n accuracy
    r = analyze("1", "3/(4*x^2)", step=0.01)
    assert r.march["coarse_step"] == pytest.approx(0.01, rel=1e-3)


def test_tail_tolerance_tradeoff():
    tight = analyze("1", "3/(4*x^2)")
    loose = analyze("1", "3/(4*x^2)", tail_tol=1e-4)
    assert loose.march["x_max"] < tight.march["x_max"]
    assert loose.constants["tail_residual_bound"] <= 1e-4
    # both certify the same limit within their stated residuals
    assert abs(loose.constants["z_infinity"] - tight.constants["z_infinity"]) \
        <= loose.constants["tail_residual_bound"] \
        + tight.constants["tail_residual_bound"]


def test_internals_expose_bundle():
    r = analyze("0", "exp(-2*x)")
    assert "bundle" in r.internals
    assert r.internals["bundle"].regime is Regime.ALGEBRAIC_INFINITY
