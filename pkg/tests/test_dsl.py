import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phlo import calculus as calc
from phlo import dsl
from phlo.dsl import EvaluationError, ParseError
from dsl_cases import CASES, K, POINTS, REJECTED


@pytest.mark.parametrize("text, oracle, smooth", CASES, ids=[c[0] for c in CASES])
def test_golden_values(text, oracle, smooth):
    for pt in POINTS:
        assert dsl.evaluate(text, pt, K) == pytest.approx(oracle(*pt, K), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("text, offset", REJECTED)
def test_rejected_inputs(text, offset):
    with pytest.raises(ParseError) as info:
        dsl.parse(text)
    assert info.value.offset == offset


def test_error_message_names_expectation():
    with pytest.raises(ParseError, match="at offset 4: expected primary"):
        dsl.parse("x + ")


def test_spot_values():
    assert dsl.evaluate("x*y", (2, 3, 0, 0)) == 6.0
    assert dsl.evaluate("bump(0)", (0, 0, 0, 0)) == pytest.approx(0.36787944117, abs=1e-11)
    assert dsl.evaluate("atan2(y,x)", (1, 1, 0, 0)) == pytest.approx(math.pi / 4)
    assert dsl.evaluate("bump(2)", (0.3, 0.1, 0, 0)) == 0.0


def test_spot_derivatives():
    assert dsl.differentiate("x^2", "x", (3, 0, 0, 0)) == pytest.approx(6.0)
    assert dsl.differentiate("bump((xi+z)/4)", "z", (0, 0, 0, 0)) == 0.0
    assert dsl.differentiate("sin(xi - z)", "xi", (0, 0, 1, 1)) == pytest.approx(1.0)


def test_power_binds_tighter_than_minus_and_is_right_associative():
    assert dsl.evaluate("-2^2", (0, 0, 0, 0)) == -4.0
    assert dsl.evaluate("2^3^2", (0, 0, 0, 0)) == 512.0
    assert dsl.evaluate(dsl.to_string(dsl.parse("-x^2")), (3, 0, 0, 0)) == -9.0


@pytest.mark.parametrize(
    "text, params, point",
    [
        ("sqrt(x)", {}, (-1, 0, 0, 0)),
        ("1/x", {}, (0, 0, 0, 0)),
        ("x^0.5", {}, (-2, 0, 0, 0)),
        ("x^-1", {}, (0, 0, 0, 0)),
        ("kappa * x", {}, (1, 0, 0, 0)),
    ],
)
def test_evaluation_errors(text, params, point):
    with pytest.raises(EvaluationError):
        dsl.evaluate(text, point, params)


def test_cannot_bind_pi_or_unknown_names():
    with pytest.raises(EvaluationError):
        dsl.evaluate("x", (0, 0, 0, 0), {"pi": 3.0})
    with pytest.raises(EvaluationError):
        dsl.evaluate("x", (0, 0, 0, 0), {"mu": 3.0})


def test_round_trip_on_goldens():
    rng = np.random.default_rng(9)
    pts = rng.uniform(-0.9, 0.9, size=(100, 4))
    for text, _, _ in CASES:
        printed = dsl.to_string(dsl.parse(text))
        a = dsl.evaluate(text, pts.T, K)
        b = dsl.evaluate(printed, pts.T, K)
        np.testing.assert_allclose(b, a, rtol=1e-15, atol=1e-15)


names = st.sampled_from(["x", "y", "z", "xi", "1.5", "pi", "2"])


def exprs():
    return st.recursive(
        names,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            st.tuples(st.sampled_from(["sin", "cos", "exp"]), inner).map(lambda t: f"{t[0]}({t[1]} / 9)"),
            inner.map(lambda e: f"-{e}" if not e.startswith("-") else e),
            inner.map(lambda e: f"({e})^2"),
        ),
        max_leaves=8,
    )


@settings(max_examples=80, deadline=None)
@given(exprs())
def test_round_trip_property(text):
    pts = np.array([[0.1, -0.2, 0.3, 0.4], [-0.5, 0.6, 0.7, -0.8]]).T
    printed = dsl.to_string(dsl.parse(text))
    assert dsl.to_string(dsl.parse(printed)) == printed
    np.testing.assert_allclose(dsl.evaluate(printed, pts), dsl.evaluate(text, pts), rtol=1e-15, atol=1e-300)


@pytest.mark.parametrize("text, oracle, smooth", [c for c in CASES if c[2]], ids=[c[0] for c in CASES if c[2]])
def test_dual_matches_central_difference(text, oracle, smooth):
    h = 1e-6
    for pt in POINTS:
        for var, i in dsl.VARIABLES.items():
            exact = dsl.differentiate(text, var, pt, K)
            hi, lo = list(pt), list(pt)
            hi[i] += h
            lo[i] -= h
            fd = (dsl.evaluate(text, hi, K) - dsl.evaluate(text, lo, K)) / (2 * h)
            assert abs(exact - fd) <= 1e-6 * max(1.0, abs(exact))


def test_bump_smooth_at_support_edge():
    h = 1e-9
    for t in (1 + 1e-8, 1 - 1e-8, -1 - 1e-8, -1 + 1e-8):
        fd = (dsl.evaluate("bump(x)", (t + h, 0, 0, 0)) - dsl.evaluate("bump(x)", (t - h, 0, 0, 0))) / (2 * h)
        assert abs(fd) < 1e-10


def test_expr_field_integrates_with_calculus():
    f = dsl.field("sin(x)*bump((xi+z)/4)")
    pts = np.array([[0.3, 0.0, 0.5, 0.2], [1.0, 2.0, -1.0, 0.5]])
    vals = calc.evaluate(f.partial(0), pts)
    want = [dsl.differentiate("sin(x)*bump((xi+z)/4)", "x", p) for p in pts]
    np.testing.assert_allclose(vals, want, rtol=1e-15)
    assert "sin" in repr(f)


def test_expr_field_binds_constants():
    f = dsl.field("kappa / l0 * z", kappa=-1, l0=0.5)
    assert calc.evaluate(f, [[0, 0, 1, 0]])[0] == -2.0
    with pytest.raises(EvaluationError):
        dsl.field("x", mu=1.0)
