import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from aalab.empirical import (EmpiricalMeasure, PathWindow, bl_distance, bl_distance_oracle, pairwise,
                             tightness_modulus, uniform_integrability_profile)
from aalab.processes import OuParams, PathEnsemble, TimeGrid, simulate_ou


def line(points, weights=None):
    return EmpiricalMeasure(np.asarray(points, dtype=float), weights)


ORACLE_CASES = [
    (line([0.0]), line([1.0]), 1.0),
    (line([0.0, 1.0]), line([0.0]), 0.5),
    (line([0.0]), line([3.0]), 2.0),
]


def test_measure_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((0, 1)))
    with pytest.raises(ValueError):
        EmpiricalMeasure([0.0, 1.0], [0.7, 0.7])
    with pytest.raises(ValueError):
        EmpiricalMeasure([0.0, 1.0], [1.5, -0.5])
    with pytest.raises(ValueError):
        EmpiricalMeasure([0.0], metric="taxicab")
    with pytest.raises(ValueError):
        EmpiricalMeasure([[0.0, 1.0]], metric="path", window=PathWindow(0.5, 1))
    with pytest.raises(ValueError):
        EmpiricalMeasure([np.nan])


def test_path_window_layout():
    w = PathWindow(0.25, 3)
    assert (w.per_level, w.length) == (4, 25)
    with pytest.raises(ValueError):
        PathWindow(0.3)
    with pytest.raises(ValueError):
        PathWindow(0.5, 0)


def test_dimension_and_metric_mismatch():
    with pytest.raises(ValueError):
        bl_distance(line([0.0]), EmpiricalMeasure([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        bl_distance(EmpiricalMeasure([[0.0, 1.0]]), EmpiricalMeasure([[0.0, 1.0]], metric="max"))


def test_identical_is_zero():
    mu = EmpiricalMeasure(np.random.default_rng(0).normal(size=(30, 2)))
    res = bl_distance(mu, mu)
    assert res.value == 0.0


@pytest.mark.parametrize("mu, nu, expected", ORACLE_CASES)
def test_lp_against_oracle(mu, nu, expected):
    lp = bl_distance(mu, nu)
    oracle = bl_distance_oracle(mu, nu)
    assert abs(lp.value - oracle.value) <= 2e-3
    assert lp.value == pytest.approx(expected, abs=1e-9)
    assert lp.method == "lp" and oracle.method == "oracle"


def test_oracle_refuses_large_support():
    with pytest.raises(ValueError):
        bl_distance_oracle(line([0.0, 1.0]), line([2.0, 3.0]))


def _random_measure(rng, n=4, dim=2, spread=1.5):
    return EmpiricalMeasure(rng.uniform(-spread, spread, size=(n, dim)), rng.dirichlet(np.ones(n)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_lp_matches_oracle_three_points(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, size=(3, 1))
    mu = EmpiricalMeasure(pts[:2], rng.dirichlet([1, 1]))
    nu = EmpiricalMeasure(pts[2:])
    assert abs(bl_distance(mu, nu).value - bl_distance_oracle(mu, nu).value) <= 2e-3


def test_metric_axioms_on_random_instances():
    rng = np.random.default_rng(20240610)
    for _ in range(100):
        a, b, c = (_random_measure(rng) for _ in range(3))
        ab, ba = bl_distance(a, b).value, bl_distance(b, a).value
        assert abs(ab - ba) <= 1e-9
        ac, cb = bl_distance(a, c).value, bl_distance(c, b).value
        assert ab <= ac + cb + 1e-8
        assert 0 < ab <= 2


def test_zero_iff_same_after_merging():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(4, 2))
    mu = EmpiricalMeasure(pts, [0.1, 0.2, 0.3, 0.4])
    # same law written with a duplicated atom and a different order
    nu = EmpiricalMeasure(np.vstack([pts[::-1], pts[:1]]), [0.4, 0.3, 0.2, 0.05, 0.05])
    assert bl_distance(mu, nu).value <= 1e-9
    assert bl_distance(mu, EmpiricalMeasure(pts)).value > 1e-3


def test_optimizer_feasible():
    rng = np.random.default_rng(5)
    for dim in (1, 2):
        mu, nu = _random_measure(rng, 6, dim), _random_measure(rng, 5, dim)
        res = bl_distance(mu, nu)
        assert np.all(np.abs(res.optimizer) <= 1 + 1e-9)
        D = pairwise(res.points, res.points)
        gap = np.abs(res.optimizer[:, None] - res.optimizer[None, :])
        assert np.all(gap <= D + 1e-9)
        json.dumps(res.to_dict())


def test_bound_by_max_pairwise_distance():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mu, nu = _random_measure(rng, spread=0.4), _random_measure(rng, spread=0.4)
        dmax = pairwise(mu.support, nu.support).max()
        assert bl_distance(mu, nu).value <= min(dmax, 2.0) + 1e-9


def test_mixture_bound():
    rng = np.random.default_rng(12)
    for _ in range(20):
        m1, m2, n1, n2 = (_random_measure(rng) for _ in range(4))
        lam = rng.uniform()

        def mix(a, b):
            return EmpiricalMeasure(np.vstack([a.support, b.support]),
                                    np.concatenate([lam * a.weights, (1 - lam) * b.weights]))

        lhs = bl_distance(mix(m1, m2), mix(n1, n2)).value
        rhs = lam * bl_distance(m1, n1).value + (1 - lam) * bl_distance(m2, n2).value
        assert lhs <= rhs + 1e-8


def test_large_routes_agree_with_lp():
    rng = np.random.default_rng(13)
    a = EmpiricalMeasure(rng.normal(size=(150, 2)))
    b = EmpiricalMeasure(rng.normal(0.3, 1.2, size=(150, 2)))
    lp = bl_distance(a, b)
    assign = bl_distance(a, b, small=0)
    assert assign.method == "assignment"
    assert assign.value == pytest.approx(lp.value, abs=1e-8)
    c = EmpiricalMeasure(rng.normal(size=(120, 2)))
    transport = bl_distance(a, c, small=0)
    assert transport.method == "transport"
    assert transport.value == pytest.approx(bl_distance(a, c).value, abs=1e-8)


def test_line_lp_matches_assignment():
    rng = np.random.default_rng(14)
    a, b = EmpiricalMeasure(rng.normal(size=400)), EmpiricalMeasure(rng.normal(1, 2, size=400))
    line_value = bl_distance(a, b).value
    cost = np.minimum(np.abs(a.support - b.support.T), 2.0)
    from scipy.optimize import linear_sum_assignment

    r, c = linear_sum_assignment(cost)
    assert line_value == pytest.approx(cost[r, c].mean(), abs=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_line_flow_matches_line_lp(seed):
    rng = np.random.default_rng(300 + seed)
    n, m = rng.integers(2, 80, size=2)
    scale = rng.choice([0.1, 1.0, 5.0])
    a = EmpiricalMeasure(rng.normal(0, scale, n), rng.dirichlet(np.ones(n)))
    b = EmpiricalMeasure(rng.normal(rng.normal(), scale, m), rng.dirichlet(np.ones(m)))
    flow = bl_distance(a, b, small=0)
    assert flow.method == "flow"
    assert flow.value == pytest.approx(bl_distance(a, b, small=10**6).value, abs=1e-9)


def test_coalesced_and_save_load(tmp_path):
    mu = EmpiricalMeasure([[0.0, 1.0], [0.0, 1.0], [2.0, 3.0]])
    merged = mu.coalesced()
    assert merged.size == 2
    np.testing.assert_allclose(sorted(merged.weights), [1 / 3, 2 / 3])
    mu.save(tmp_path / "m.csv")
    back = EmpiricalMeasure.load(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.support, mu.support)
    np.testing.assert_allclose(back.weights, mu.weights, rtol=1e-15)


def test_path_metric_monotone_in_levels():
    rng = np.random.default_rng(15)
    w3 = PathWindow(0.25, 3)
    a, b = rng.normal(size=(5, w3.length)), rng.normal(0, 0.3, size=(6, w3.length))
    mid, half = w3.length // 2, w3.per_level
    d3 = pairwise(a, b, "path", w3)
    prev = np.zeros_like(d3)
    for levels in (1, 2, 3):
        span = levels * half
        d = pairwise(a[:, mid - span:mid + span + 1], b[:, mid - span:mid + span + 1], "path", w3.coarsen(levels))
        assert np.all(d >= prev - 1e-15)
        assert np.all(d <= 1 - 0.5**levels + 1e-15)
        prev = d
    np.testing.assert_array_equal(prev, d3)


def _tail_oracle(c, p=2):
    return 2 * integrate.quad(lambda z: z**p * stats.norm.pdf(z), c, np.inf)[0]


def test_ui_profile_gaussian():
    z = np.random.default_rng(16).standard_normal(100_000)
    rows = uniform_integrability_profile([z], 2, [0.0, 3.0])
    assert rows[0][1] == pytest.approx(np.mean(z**2))
    assert abs(rows[0][1] - 1.0) < 3 * np.std(z**2) / math.sqrt(z.size)
    tail = np.where(np.abs(z) > 3, z**2, 0.0)
    assert _tail_oracle(3.0) == pytest.approx(0.029291, abs=1e-6)
    assert abs(rows[1][1] - _tail_oracle(3.0)) < 3 * tail.std() / math.sqrt(z.size)


def test_ui_profile_bounded_and_sup():
    a = np.random.default_rng(17).uniform(-2, 2, size=(1000, 2))
    rows = uniform_integrability_profile([a, EmpiricalMeasure(a * 0.5)], 1.5, [0.0, 1.0, 2 * math.sqrt(2)])
    assert rows[-1][1] == 0.0
    assert rows[0][1] == pytest.approx(np.mean(np.linalg.norm(a, axis=1) ** 1.5))
    with pytest.raises(ValueError):
        uniform_integrability_profile([a], 0, [1.0])


def _ensemble(values, h=0.1):
    values = np.asarray(values, dtype=float)
    return PathEnsemble(TimeGrid(0.0, h, values.shape[1] - 1), values, 0, "fixed")


def test_tightness_constant_paths():
    ens = _ensemble(np.tile(np.arange(10.0)[:, None], (1, 101)))
    assert all(row[2] == 0.0 for row in tightness_modulus(ens, (0.0, 3.0), [0.5, 1.0], 0.1, [0.0, 5.0]))


def test_tightness_drift_paths():
    ens = _ensemble(np.tile(np.linspace(0, 10, 101), (4, 1)))
    rows = tightness_modulus(ens, (0.0, 3.0), [1.0], 0.5, [0.0, 2.0])
    assert [r[2] for r in rows] == [1.0, 1.0]
    # the largest pair gap below delta = 0.5 is 0.4 < eta
    assert tightness_modulus(ens, (0.0, 3.0), [0.5], 0.5, [0.0])[0][2] == 0.0


def test_tightness_ou_decreasing_and_rejects_small_delta():
    ens = simulate_ou(OuParams(1.0, 1.0), TimeGrid(0.0, 0.01, 1000), 2000, 42)
    rows = tightness_modulus(ens, (0.0, 1.0), [0.05, 0.1, 0.3], 0.5, [0.0])
    probs = [r[2] for r in rows]
    assert probs == sorted(probs)
    # increments over lags < 0.05 have SD below 0.3, so exceeding 2 is rare
    assert tightness_modulus(ens, (0.0, 1.0), [0.05], 2.0, [0.0])[0][2] < 0.01
    with pytest.raises(ValueError):
        tightness_modulus(ens, (0.0, 1.0), [0.01], 0.5, [0.0])
