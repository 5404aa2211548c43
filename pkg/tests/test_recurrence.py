import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aalab import measures
from aalab.functions import AP2, LEVITAN, parse
from aalab.recurrence import (HEADER, RecurrenceReport, aa_double_shift_test, almost_period_scan,
                              almost_period_shifts, compact_aa_uniformity, paa_residual_test)

# continued-fraction denominators of sqrt2
PELL = (2, 5, 12, 29, 70, 169, 408, 985, 2378)
AP2_PERIODS = [0.05, 75.45, 106.65, 182.2]


def shifts(qs):
    return [2 * math.pi * q for q in qs]


def test_report_requires_witness():
    with pytest.raises(ValueError):
        RecurrenceReport("x", "refutes", {})
    with pytest.raises(ValueError):
        RecurrenceReport("x", "maybe", {})


def test_constant_every_shift_qualifies():
    rep = almost_period_scan("2.0", 0.01, (-10, 10), (0, 5), 0.5)
    assert rep.consistent
    assert rep.data["shifts"]["count"] == 11
    assert rep.data["largest_gap"] == pytest.approx(0.5)


def test_ap2_scan_bounded_gaps():
    rep = almost_period_scan(AP2(), 0.2, (-10, 10), (0, 200), 0.01, density_length=80)
    assert rep.consistent
    assert rep.data["largest_gap"] < 80
    assert rep.header == HEADER


def test_ap2_scan_agrees_with_finer_direct_oracle():
    found = almost_period_shifts(AP2(), 0.2, (-10, 10), (0, 200), 0.01)
    ts = np.linspace(-10, 10, 4001)
    base = np.sin(ts) + np.sin(math.sqrt(2) * ts)
    for tau in found:
        moved = np.sin(ts + tau) + np.sin(math.sqrt(2) * (ts + tau))
        # finer time grid can only raise the sup slightly
        assert np.abs(moved - base).max() <= 0.2 + 1e-3


def test_identity_scan_refutes():
    rep = almost_period_scan("t", 0.25, (-10, 10), (0, 50), 0.1)
    assert not rep.consistent
    # |f(t + tau) - f(t)| = tau, so exactly the shifts up to epsilon qualify
    assert rep.data["shifts"]["items"] == pytest.approx([0.0, 0.1, 0.2])
    assert rep.witness["uncovered"]["count"] == 1


def test_scan_errors():
    with pytest.raises(ValueError):
        almost_period_scan("t", 0.2, (-10, 10), (5, 0), 0.1)
    with pytest.raises(ValueError):
        almost_period_scan("t", 0.2, (-10, 10), (0, 5), 0.0)


def test_scan_witness_cap():
    rep = almost_period_scan("2.0", 0.01, (-1, 1), (0, 500), 1.0)
    assert rep.data["shifts"]["count"] == 501
    assert len(rep.data["shifts"]["items"]) == 100


@settings(max_examples=10, deadline=None)
@given(e1=st.floats(0.05, 0.5), e2=st.floats(0.05, 0.5))
def test_scan_monotone_in_epsilon(e1, e2):
    lo, hi = sorted((e1, e2))
    a = almost_period_shifts(AP2(), lo, (-5, 5), (0, 60), 0.05, grid_step=0.05)
    b = almost_period_shifts(AP2(), hi, (-5, 5), (0, 60), 0.05, grid_step=0.05)
    assert set(a.tolist()) <= set(b.tolist())


def test_constant_double_shift():
    rep = aa_double_shift_test("1.5", [1.0, 2.0, 3.0, 4.0])
    assert rep.consistent
    assert rep.data["g_hat_range"] == [1.5, 1.5]


def test_levitan_short_continued_fraction_refutes():
    rep = aa_double_shift_test(LEVITAN(), shifts(PELL[:7]))
    assert not rep.consistent
    assert rep.data["worst_cauchy_oscillation"] == pytest.approx(0.288, abs=1e-3)
    assert "non_cauchy" in rep.witness


def test_levitan_deeper_continued_fraction_consistent():
    rep = aa_double_shift_test(LEVITAN(), shifts(PELL))
    assert rep.consistent
    assert rep.data["worst_cauchy_oscillation"] < 0.05


def test_identity_double_shift_refutes():
    rep = aa_double_shift_test("t", [1.0, 10.0, 100.0, 1000.0])
    assert not rep.consistent
    assert rep.witness["non_cauchy"]["count"] > 0
    json.dumps(rep.to_dict())


def test_double_shift_needs_four_shifts():
    with pytest.raises(ValueError):
        aa_double_shift_test("t", [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        compact_aa_uniformity("t", [1.0, 2.0, 3.0])


def test_junk_prefix_invariance():
    base = aa_double_shift_test(LEVITAN(), shifts(PELL))
    junk = aa_double_shift_test(LEVITAN(), [3.3, 17.0] + shifts(PELL))
    assert base.verdict == junk.verdict
    assert base.data == junk.data


def test_compact_constant():
    assert compact_aa_uniformity("0.3", [1.0, 2.0, 3.0, 4.0]).consistent


def test_compact_ap2_with_almost_periods():
    rep = compact_aa_uniformity(AP2(), AP2_PERIODS, tol=0.5)
    assert rep.consistent


def test_compact_levitan_spike_window_refutes():
    rep = compact_aa_uniformity(LEVITAN(), shifts(PELL), window=(525, 537))
    assert not rep.consistent
    assert rep.data["uniform_cauchy"] > 1.5


def test_uniform_modulus_matches_pointwise():
    pw = aa_double_shift_test(AP2(), AP2_PERIODS, tol=0.5)
    un = compact_aa_uniformity(AP2(), AP2_PERIODS, tol=0.5)
    assert max(un.data["uniform_modulus"]) <= pw.data["worst_pointwise_modulus"] + 1e-15


def test_paa_residual_identical():
    curve = paa_residual_test(AP2(), AP2(), measures.lebesgue(), [10.0, 100.0])
    assert np.all(curve.values == 0.0)


def test_paa_residual_arctan():
    radii = [10.0, 100.0, 1000.0]
    curve = paa_residual_test(parse("LEVITAN + ERG1"), LEVITAN(), measures.lebesgue(), radii)
    np.testing.assert_allclose(curve.values, [math.atan(r) / r for r in radii], atol=1e-9)


def test_paa_residual_offset_is_one():
    curve = paa_residual_test(parse("LEVITAN + 1"), LEVITAN(), measures.lebesgue(), [10.0, 100.0])
    np.testing.assert_allclose(curve.values, 1.0, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(0.1, 3), b=st.floats(-2, 2))
def test_paa_residual_depends_on_difference(a, b):
    h = f"{b}*cos({a}*t)"
    r1 = paa_residual_test("ERG2", "0.0", measures.lebesgue(), [5.0, 50.0])
    r2 = paa_residual_test(f"ERG2 + {h}", h, measures.lebesgue(), [5.0, 50.0])
    np.testing.assert_allclose(r1.values, r2.values, atol=1e-12)
