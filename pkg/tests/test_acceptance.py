"""End-to-end acceptance checks at their stated tolerances.

Each test prints (and records for the terminal summary) one PASS/FAIL line.
Experiments run on the shipped configs.
"""

import filecmp
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from aalab import config as cfgmod
from aalab import experiments, measures
from aalab.empirical import EmpiricalMeasure, bl_distance, bl_distance_oracle
from aalab.functions import CATALOG_NAMES, ERG1, ERG2, catalog
from aalab.processes import OuParams, TimeGrid, simulate_ou
from aalab.sde import SdeModel, contraction_rate, gronwall_bound_check
from aalab.seminorms import besicovitch, seminorm, seminorm_ordering_check, stepanov, weyl
from aalab.tables import read_csv
from conftest import record

SCENARIOS = ("ou-counterexample", "remark-nonvector", "theorem-aa", "theorem-main", "superposition")


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("shipped")
    out = {}
    for name in SCENARIOS:
        cfg = cfgmod.load_config(cfgmod.shipped_config(name))
        experiments.run(cfg, root / name)
        out[name] = root / name
    return out


def _cols(path):
    return {k: np.asarray(v, dtype=float) for k, v in read_csv(path).items()}


def test_criterion_01_ou_covariance():
    start = time.perf_counter()
    lines = []
    ok = True
    for i, (alpha, sigma, tau) in enumerate([(1.0, 1.0, 0.5), (0.5, 2.0, 1.0)]):
        e = simulate_ou(OuParams(alpha, sigma), TimeGrid(0.0, tau, 1), 100_000, 20240601, f"acceptance-cov-{i}")
        x, y = e.paths[:, 0, 0], e.paths[:, 1, 0]
        prod = (x - x.mean()) * (y - y.mean())
        est, se = prod.mean(), prod.std(ddof=1) / math.sqrt(x.size)
        target = sigma**2 * math.exp(-alpha * tau)
        ok &= abs(est - target) <= 3 * se
        lines.append(f"{est:.4f} vs {target:.4f} (se {se:.4f})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30
    assert record(1, ok, "; ".join(lines) + f"; {elapsed:.1f} s")


def test_criterion_02_besicovitch_gap():
    start = time.perf_counter()
    grid = TimeGrid(0.0, 0.05, 1000)
    x = simulate_ou(OuParams(1.0, 1.0), grid, 10_000, 20240601, "acceptance-gap").paths[:, :, 0]
    ok = True
    lines = []
    for delta, printed in [(0.5, 0.7869), (2.0, 1.7293), (5.0, 1.9865)]:
        j = grid.lag(delta)
        est = float(np.mean((x[:, j:] - x[:, :-j]) ** 2))
        target = 2.0 * -math.expm1(-delta)
        assert target == pytest.approx(printed, abs=1e-4)
        ok &= abs(est - target) <= 0.05 * target
        if delta >= 1.0:
            ok &= est > 1.0
        lines.append(f"D={delta:g}: {est:.4f} vs {target:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    assert record(2, ok, "; ".join(lines) + f"; {elapsed:.1f} s")


def test_criterion_03_split_on_one_ensemble(bundles):
    out = bundles["ou-counterexample"]
    curve = _cols(out / "path_curve.csv")
    gap = _cols(out / "gap.csv")
    shifts_ok = set(curve["shift"].tolist()) == set(float(s) for s in range(1, 21))
    ok = shifts_ok and bool(np.all(curve["ratio"] <= 2.0)) and bool(np.all(gap["estimate"] > 0.5))
    assert record(3, ok, f"max path ratio {curve['ratio'].max():.3f}; min gap {gap['estimate'].min():.3f}")


def test_criterion_04_frozen_sum(bundles):
    out = bundles["remark-nonvector"]
    var = _cols(out / "variance.csv")
    z = _cols(out / "z_onedim_curve.csv")
    assert var["t"].tolist() == [0.0, 1.0, 5.0, 20.0]
    target = 2.0 * (1.0 + np.exp(-np.abs(var["t"])))
    within = np.abs(var["variance"] - target) <= 3 * var["se"]
    ok = bool(np.all(within)) and float(z["ratio"].max()) > 5.0
    assert record(4, ok, f"|err|/se max {np.max(np.abs(var['variance'] - target) / var['se']):.2f}; "
                         f"Z ratios {np.round(z['ratio'], 2).tolist()}")


def _random4(rng):
    return EmpiricalMeasure(rng.uniform(-1.5, 1.5, size=(4, 2)), rng.dirichlet(np.ones(4)))


def test_criterion_05_bl_distance():
    line = lambda pts: EmpiricalMeasure(np.asarray(pts, dtype=float))
    cases = [(line([0.0]), line([1.0]), 1.0), (line([0.0, 1.0]), line([0.0]), 0.5), (line([0.0]), line([3.0]), 2.0)]
    ok = True
    for mu, nu, expected in cases:
        lp = bl_distance(mu, nu).value
        oracle = bl_distance_oracle(mu, nu).value
        ok &= abs(lp - oracle) <= 2e-3 and abs(lp - expected) <= 2e-3
    rng = np.random.default_rng(20240610)
    worst = 0.0
    for _ in range(100):
        a, b, c = (_random4(rng) for _ in range(3))
        ab, ba = bl_distance(a, b).value, bl_distance(b, a).value
        ac, cb = bl_distance(a, c).value, bl_distance(c, b).value
        aa = bl_distance(a, a).value
        worst = max(worst, abs(ab - ba), ab - ac - cb, aa, -ab)
        ok &= ab > 0.0
    ok &= worst <= 1e-8
    assert record(5, ok, f"worst axiom violation {worst:.2e}")


def test_criterion_06_ergodic_mean():
    radii = [10.0, 100.0, 1000.0]
    curve = measures.ergodic_mean(ERG1(), measures.lebesgue(), radii)
    err = float(np.max(np.abs(curve.values - np.arctan(radii) / radii)))
    assert record(6, err <= 1e-6, f"max error {err:.2e}")


def test_criterion_07_seminorms():
    target = math.sqrt(0.5)
    w = seminorm("sin(t)", weyl(2))
    b = seminorm("sin(t)", besicovitch(2))
    ok = abs(w.value - target) <= 1e-3 and abs(b.value - target) <= 1e-3
    orders = [seminorm_ordering_check(catalog(name), p) for name in CATALOG_NAMES for p in (1.0, 2.0)]
    ok &= all(o["stepanov_ge_weyl"] and o["pass"] for o in orders)
    s2 = seminorm(ERG2(), stepanov(2)).value
    w2, b2 = seminorm(ERG2(), weyl(2)), seminorm(ERG2(), besicovitch(2))
    ok &= w2.zero_within_tolerance and b2.zero_within_tolerance and s2 > 0.3
    assert record(7, ok, f"W {w.value:.5f} B {b.value:.5f}; ordering {sum(o['pass'] for o in orders)}/"
                         f"{len(orders)}; ERG2 S {s2:.4f} W {w2.value:.1e} B {b2.value:.1e}")


def _gronwall_instance(rng, holds):
    alpha = rng.uniform(0.1, 5.0)
    beta = rng.uniform(0.01, 0.9)
    delta = beta + rng.uniform(0.05, 2.0)
    u = rng.uniform(0.0, 0.99) if holds else rng.uniform(1.01, 2.0)
    g = u * alpha * delta / (delta - beta)
    return gronwall_bound_check(repr(alpha), [beta], [delta], delta - beta, repr(g), (0.0, 5.0), h=0.05)


def test_criterion_08_gronwall():
    rng = np.random.default_rng(20240611)
    held = sum(_gronwall_instance(rng, True).verdict == "pass" for _ in range(50))
    flagged = sum(_gronwall_instance(rng, False).verdict == "hypothesis fails" for _ in range(50))
    assert record(8, held == 50 and flagged == 50, f"validated {held}/50, flagged {flagged}/50")


def test_criterion_09_contraction():
    start = time.perf_counter()
    drift = SdeModel([1.0], ["0.3*tanh(x) + 0.3*sin(t)"], [["0.0"]], [1.0], K_growth=0.3, K_lip=0.3)
    r1 = contraction_rate(drift, TimeGrid(-10.0, 0.01, 2000), 4, 20240612, 8, bound=0.09)
    K = math.sqrt(0.5)
    full = SdeModel([1.0], [f"{K / 2!r}*sin(t) + {K / 2!r}*tanh(x)"], [[f"{K / 2!r}*cos(t) + {K / 2!r}*tanh(x)"]],
                    [0.5], K_growth=K, K_lip=K)
    r2 = contraction_rate(full, TimeGrid(-10.0, 0.01, 2000), 10_000, 20240612, 8, bound=0.5)
    elapsed = time.perf_counter() - start
    ok = (r1.tail_max <= 0.09 * 1.2 and r2.theta == pytest.approx(0.5)
          and max(r2.ratios) <= 0.6 and elapsed < 300)
    assert record(9, ok, f"drift-only tail {r1.tail_max:.3f}; full max {max(r2.ratios):.3f} "
                         f"(theta {r2.theta:.2f}); {elapsed:.1f} s")


def test_criterion_10_decomposition(bundles):
    out = bundles["theorem-main"]
    curve = _cols(out / "ergodic_curve.csv")
    at = dict(zip(curve["r"].tolist(), curve["value"].tolist()))
    y = _cols(out / "y_path_curve.csv")
    ok = at[400.0] < 0.25 * at[25.0] and bool(np.all(y["ratio"] <= 2.0))
    assert record(10, ok, f"r=400/r=25 {at[400.0] / at[25.0]:.3f}; max Y path ratio {y['ratio'].max():.3f}")


def _same_bundle(a, b):
    names = sorted(p.name for p in a.iterdir())
    if names != sorted(p.name for p in b.iterdir()):
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors


def test_criterion_11_reproducibility(bundles, tmp_path):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = "1" if os.environ.get(var) != "1" else "3"
    identical = []
    for name in SCENARIOS:
        again = tmp_path / name
        # re-run from the bundle's own config, in a fresh interpreter with other thread counts
        proc = subprocess.run([sys.executable, "-m", "aalab", "experiment", name,
                               "--config", str(bundles[name] / "config.json"), "--out", str(again)],
                              env=env, capture_output=True, text=True)
        identical.append(proc.returncode in (0, 1) and _same_bundle(bundles[name], again))
    ok = all(identical)
    assert record(11, ok, f"{sum(identical)}/{len(identical)} bundles byte-identical "
                          f"(threads {env['OMP_NUM_THREADS']})")
    assert json.loads((bundles["remark-nonvector"] / "config.json").read_text())["seed"] == 20240602
