import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aalab.functions import (AP2, CATALOG_NAMES, ERG1, ERG2, LEVITAN, Clip, Const, Recip, Sampled,
                             State, Time, Unary, as_expr, catalog, parse)


def test_catalog_values():
    t = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(AP2()(t), np.sin(t) + np.sin(math.sqrt(2) * t), rtol=0, atol=1e-15)
    np.testing.assert_allclose(ERG1()(t), 1 / (1 + t * t), rtol=1e-15)
    np.testing.assert_allclose(ERG2()(t), np.exp(-np.abs(t)), rtol=1e-15)
    u = 2 + np.cos(t) + np.cos(math.sqrt(2) * t)
    np.testing.assert_allclose(LEVITAN()(t), np.sin(1 / u), rtol=1e-14)


def test_catalog_lookup():
    assert catalog("ap2", 2.0, 3.0) == AP2(2.0, 3.0)
    assert catalog("ERG1") == ERG1()
    with pytest.raises(ValueError):
        catalog("nope")
    with pytest.raises(ValueError):
        catalog("ERG1", 1.0)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_catalog_text_round_trip(name):
    e = catalog(name)
    assert parse(str(e)) == e


def test_parse_matches_numpy():
    e = parse("0.3*sin(t) + 0.3*tanh(x) - abs(t)/2 + t**2")
    t = np.array([-1.5, 0.0, 2.0])
    x = np.array([[0.5], [-2.0], [3.0]])
    want = 0.3 * np.sin(t) + 0.3 * np.tanh(x[:, 0]) - np.abs(t) / 2 + t**2
    np.testing.assert_allclose(e(t, x), want, rtol=1e-14)


def test_parse_names_and_constants():
    assert parse("x1")(0.0, np.array([[1.0, 7.0]]))[0] == 7.0
    assert parse("pi")(0.0) == math.pi
    assert parse("ERG1")(0.0) == 1.0


@pytest.mark.parametrize("bad", ["t**0.5", "t**9", "foo(t)", "y", "t +", "sin(t, t)"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse(bad)


def test_state_needs_state():
    with pytest.raises(ValueError):
        State(0)(1.0)


def test_recip_clamps():
    r = Recip(Time(), floor=1e-3)
    np.testing.assert_allclose(r(np.array([0.0, 1e-6, -1e-6, 2.0])), [1e3, 1e3, -1e3, 0.5])


def test_lipschitz_and_sup_bounds():
    assert parse("0.3*tanh(x) + 0.3*sin(t)").lipschitz_x() == pytest.approx(0.3)
    assert parse("0.3*tanh(x) + 0.3*sin(t)").sup_bound() == pytest.approx(0.6)
    assert Clip(State(0), -2, 2).lipschitz_x() == 1.0
    assert Clip(State(0), -2, 2).sup_bound() == 2.0
    assert math.isinf(State(0).sup_bound())
    assert ERG1().lipschitz_x() == 0.0


def test_sampled_interpolates():
    s = Sampled([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
    np.testing.assert_allclose(s(np.array([-1.0, 0.5, 1.5, 3.0])), [0.0, 1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        Sampled([0.0, 0.0], [1.0, 2.0])


def test_as_expr():
    assert as_expr(2) == Const(2.0)
    assert as_expr("t") == Time()
    with pytest.raises(TypeError):
        as_expr(object())


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), t=st.floats(-50, 50))
def test_affine_sin_round_trip(a, b, t):
    e = Unary("sin", Time(a, b))
    again = parse(str(e))
    assert again == e
    assert again(t) == e(t)
