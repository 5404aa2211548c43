"""Scenario runners.  Each runner writes CSV tables into a bundle directory;
verdicts are then re-derived from those tables alone by :func:`judge`."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import measures
from .diagnostics import (Protocol, cross_path_curve, onedim_distribution_curve,
                          paa_p_distribution_check, path_distribution_curve, pth_mean_curve)
from .empirical import uniform_integrability_profile
from .functions import as_expr
from .processes import (OuParams, PathEnsemble, TimeGrid, broadcast_at, simulate_ou,
                        sum_process)
from .sde import (CoefficientSplit, SdeModel, contraction_rate, simulate_mild, spot_check_constants,
                  theta, theta_prime)
from .tables import read_csv, write_csv, write_json

SPOT_TOL = 1e-9
PLOT_STRIDE = 20


def _grid(g):
    return TimeGrid(g.t0, g.h, g.n)


def _protocol(cfg):
    d = cfg.diagnostics
    return Protocol(seed=cfg.seed, cap_line=d.cap_line, cap=d.cap, splits=d.splits)


def _summary(out, items):
    write_csv(out / "summary.csv", ["key", "value"], [(k, v) for k, v in items.items()])


def _ui_rows(ensemble, cutoffs, p=2.0):
    marginals = [ensemble.paths[:, j, :] for j in range(0, ensemble.grid.n + 1, PLOT_STRIDE)]
    return uniform_integrability_profile(marginals, p, cutoffs)


def _sample_cov(x, y):
    xc, yc = x - x.mean(), y - y.mean()
    prod = xc * yc
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(x.size))


def run_ou_counterexample(cfg, out):
    ou = OuParams(cfg.ou.alpha, cfg.ou.sigma)
    rows = []
    for i, (alpha, sigma, tau) in enumerate(cfg.covariance.cases):
        e = simulate_ou(OuParams(alpha, sigma), TimeGrid(0.0, tau, 1), cfg.covariance.M, cfg.seed, f"covariance-{i}")
        est, se = _sample_cov(e.paths[:, 0, 0], e.paths[:, 1, 0])
        rows.append((alpha, sigma, tau, est, se, sigma**2 * math.exp(-alpha * tau)))
    write_csv(out / "covariance.csv", ["alpha", "sigma", "tau", "estimate", "se", "analytic"], rows)

    grid = _grid(cfg.gap.grid)
    e = simulate_ou(ou, grid, cfg.gap.M, cfg.seed, "gap")
    x = e.paths[:, :, 0]
    rows = []
    for delta in cfg.gap.deltas:
        j = grid.lag(delta)
        per_path = np.mean((x[:, j:] - x[:, :-j]) ** 2, axis=1)
        rows.append((delta, float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(per_path.size)),
                     2 * ou.sigma**2 * -math.expm1(-ou.alpha * delta)))
    write_csv(out / "gap.csv", ["delta", "estimate", "se", "analytic"], rows)

    rows = []
    for lag in cfg.gap.lags:
        j = grid.lag(lag)
        per_path = np.mean(x[:, j:] * x[:, :x.shape[1] - j], axis=1)
        rows.append((lag, float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(per_path.size)),
                     float(ou.covariance(lag))))
    write_csv(out / "covariance_curve.csv", ["lag", "estimate", "se", "analytic"], rows)

    curve = path_distribution_curve(e, [cfg.path_curve.base_time], cfg.path_curve.shifts,
                                    cfg.diagnostics.levels, _protocol(cfg))
    curve.to_csv(out / "path_curve.csv")


def run_remark_nonvector(cfg, out):
    ou = OuParams(cfg.ou.alpha, cfg.ou.sigma)
    grid = _grid(cfg.grid)
    x = simulate_ou(ou, grid, cfg.M, cfg.seed, "ou")
    z = sum_process(x, broadcast_at(x, grid.t0))
    rows = []
    for t in cfg.times:
        v = z.at(t)[:, 0]
        dev = (v - v.mean()) ** 2
        rows.append((t, float(dev.sum() / (v.size - 1)), float(dev.std(ddof=1) / math.sqrt(v.size)),
                     2 * ou.sigma**2 * (1 + math.exp(-ou.alpha * abs(t - grid.t0)))))
    write_csv(out / "variance.csv", ["t", "variance", "se", "analytic"], rows)
    protocol = _protocol(cfg)
    onedim_distribution_curve(z, [grid.t0], cfg.shifts, protocol).to_csv(out / "z_onedim_curve.csv")
    onedim_distribution_curve(x, [grid.t0], cfg.shifts, protocol).to_csv(out / "x_onedim_curve.csv")


def _model(m, f=None, g=None):
    return SdeModel(m.deltas, m.f if f is None else f, m.g if g is None else g, m.noise_variances,
                    m.K_growth, m.K_lip)


def _model_rows(model, seed):
    spot = spot_check_constants(model, seed=seed)
    return {"theta": theta(model), "theta_prime": theta_prime(model), "K_growth": model.K_growth,
            "K_lip": model.K_lip, "growth_quotient": spot["growth_quotient"],
            "lipschitz_quotient": spot["lipschitz_quotient"]}


def run_theorem_aa(cfg, out):
    model = _model(cfg.model)
    summary = _model_rows(model, cfg.seed)
    c = cfg.contraction
    rep = contraction_rate(model, _grid(c.grid), c.M, cfg.seed, c.iterations, slack=c.slack)
    rows = [(k + 1, r, rep.ratios[k - 1] if k >= 1 and k - 1 < len(rep.ratios) else float("nan"))
            for k, r in enumerate(rep.residuals)]
    write_csv(out / "contraction.csv", ["iteration", "residual", "ratio"], rows)
    summary["contraction_slack"] = c.slack
    summary["contraction_converged"] = rep.converged
    ens = simulate_mild(model, _grid(cfg.grid), cfg.burn_in, cfg.M, cfg.seed)
    summary["bias_bound"] = ens.params["bias_bound"]
    _summary(out, summary)
    protocol = _protocol(cfg)
    onedim_distribution_curve(ens, [cfg.base_time], cfg.shifts, protocol).to_csv(out / "onedim_curve.csv")
    path_distribution_curve(ens, [cfg.base_time], cfg.shifts, cfg.diagnostics.levels,
                            protocol).to_csv(out / "path_curve.csv")
    write_csv(out / "ui_profile.csv", ["cutoff", "value"], _ui_rows(ens, cfg.ui_cutoffs))


def _shifted(model, gamma):
    return SdeModel(model.deltas, lambda t, x: model.drift(t + gamma, x),
                    lambda t, x: model.diffusion(t + gamma, x), model.noise_variances,
                    model.K_growth, model.K_lip)


def run_theorem_main(cfg, out):
    m = cfg.model
    split = CoefficientSplit(m.f1, m.f2, m.g1, m.g2)
    full = SdeModel(m.deltas, split.f, split.g, m.noise_variances, m.K_growth, m.K_lip)
    aa = SdeModel(m.deltas, split.f1, split.g1, m.noise_variances, m.K_growth, m.K_lip)
    summary = _model_rows(full, cfg.seed)
    aa_rows = _model_rows(aa, cfg.seed)
    summary["aa_growth_quotient"] = aa_rows["growth_quotient"]
    summary["aa_lipschitz_quotient"] = aa_rows["lipschitz_quotient"]
    summary["split_max_deviation"] = split.check_identity(full, seed=cfg.seed)["max_deviation"]
    grid = _grid(cfg.grid)
    # same seed and stream: X and Y see the same noise block
    X = simulate_mild(full, grid, cfg.burn_in, cfg.M, cfg.seed)
    Y = simulate_mild(aa, grid, cfg.burn_in, cfg.M, cfg.seed)
    summary["bias_bound"] = max(X.params["bias_bound"], Y.params["bias_bound"])
    _summary(out, summary)
    protocol = _protocol(cfg)
    mu = measures.from_config(cfg.measure.to_spec())
    res = paa_p_distribution_check(X, Y, cfg.p, mu, cfg.radii, cfg.shifts, [cfg.base_time],
                                   cfg.diagnostics.levels, protocol=protocol)
    write_csv(out / "ergodic_curve.csv", ["r", "value"], res["ergodic_curve"].rows())
    t = res["z_times"][::PLOT_STRIDE]
    write_csv(out / "z_pth_mean.csv", ["t", "value"], zip(t.tolist(), res["z_pth_mean"][::PLOT_STRIDE].tolist()))
    res["path_curve"].to_csv(out / "y_path_curve.csv")
    res["onedim_curve"].to_csv(out / "y_onedim_curve.csv")
    write_csv(out / "ui_profile.csv", ["cutoff", "value"], res["ui_profile"] or [])

    pr = cfg.probe
    rows = []
    for gamma in pr.gammas:
        Xg = simulate_mild(_shifted(full, gamma), _grid(pr.grid), cfg.burn_in, cfg.M, cfg.seed,
                           generator_id=f"probe-{gamma!r}")
        d, floor = cross_path_curve(Xg, pr.base_time, X, pr.base_time + gamma, cfg.diagnostics.levels, protocol)
        rows.append((gamma, d, floor, d / floor if floor > 0 else float("nan")))
    write_csv(out / "shift_probe.csv", ["gamma", "d_bl", "noise_floor", "ratio"], rows)


def run_superposition(cfg, out):
    grid = _grid(cfg.grid)
    y = simulate_ou(OuParams(cfg.ou.alpha, cfg.ou.sigma), grid, cfg.M, cfg.seed, "ou")
    times = grid.times
    f1, f2 = as_expr(cfg.f1), as_expr(cfg.f2)
    G = np.broadcast_to(f1(times, y.paths), y.paths.shape[:2])[..., None]
    H = np.broadcast_to(f2(times, y.paths), y.paths.shape[:2])[..., None]
    g_ens = PathEnsemble(grid, np.ascontiguousarray(G), cfg.seed, "superposition-G", {"f1": cfg.f1})
    protocol = _protocol(cfg)
    onedim_distribution_curve(g_ens, [cfg.base_time], cfg.shifts, protocol).to_csv(out / "g_onedim_curve.csv")
    path_distribution_curve(g_ens, [cfg.base_time], cfg.shifts, cfg.diagnostics.levels,
                            protocol).to_csv(out / "g_path_curve.csv")
    mu = measures.from_config(cfg.measure.to_spec())
    h_mean = pth_mean_curve(H, 2.0)
    curve = measures.ergodic_mean_sampled(times, h_mean, mu, cfg.radii)
    write_csv(out / "h_ergodic_curve.csv", ["r", "value"], curve.rows())
    write_csv(out / "h_rms.csv", ["t", "value"], zip(times[::PLOT_STRIDE].tolist(), h_mean[::PLOT_STRIDE].tolist()))


RUNNERS = {
    "ou-counterexample": run_ou_counterexample,
    "remark-nonvector": run_remark_nonvector,
    "theorem-aa": run_theorem_aa,
    "theorem-main": run_theorem_main,
    "superposition": run_superposition,
}


def run(cfg, out_dir):
    """Run a validated config, write the bundle and return its verdicts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfgmod.resolved(cfg))
    RUNNERS[cfg.scenario](cfg, out)
    verdicts = judge(out)
    write_json(out / "verdicts.json", verdicts)
    return verdicts


# -- judge: verdicts from tables only ---------------------------------------


def _check(ok, **detail):
    return {"pass": bool(ok), **detail}


def _cols(out, name):
    return {k: np.asarray(v, dtype=float) for k, v in read_csv(out / name).items()}


def _summary_map(out):
    cols = read_csv(out / "summary.csv")
    return dict(zip(cols["key"], cols["value"]))


def _within_se(t, n_se):
    dev = np.abs(t["estimate"] - t["analytic"])
    return _check(np.all(dev <= n_se * t["se"]), max_z=float(np.max(dev / t["se"])))


def _ratio_check(t, limit):
    worst = float(np.max(t["ratio"]))
    return _check(worst <= limit, max_ratio=worst, limit=limit)


def _decay_check(t, fraction):
    first, last = float(t["value"][0]), float(t["value"][-1])
    return _check(last < fraction * first, first=first, last=last, fraction=fraction)


def _model_checks(s, prefix=""):
    return {
        f"{prefix}constants_growth": _check(s[f"{prefix}growth_quotient"] <= s["K_growth"] + SPOT_TOL,
                                            quotient=s[f"{prefix}growth_quotient"], K=s["K_growth"]),
        f"{prefix}constants_lipschitz": _check(s[f"{prefix}lipschitz_quotient"] <= s["K_lip"] + SPOT_TOL,
                                               quotient=s[f"{prefix}lipschitz_quotient"], K=s["K_lip"]),
    }


def _ui_check(t, fraction):
    v = t["value"]
    ok = np.all(np.diff(v) <= 1e-15) and v[-1] <= fraction * max(v[0], 1e-300)
    return _check(ok, first=float(v[0]), last=float(v[-1]), fraction=fraction)


def judge(out_dir):
    out = Path(out_dir)
    cfg = cfgmod.parse_config(_load_json(out / "config.json"))
    limit = cfg.diagnostics.max_ratio
    checks, info = {}, {}
    if cfg.scenario == "ou-counterexample":
        sigma2, alpha = cfg.ou.sigma**2, cfg.ou.alpha
        checks["covariance_3se"] = _within_se(_cols(out, "covariance.csv"), cfg.covariance.n_se)
        gap = _cols(out, "gap.csv")
        rel = np.abs(gap["estimate"] - gap["analytic"]) / gap["analytic"]
        checks["gap_formula"] = _check(np.all(rel <= cfg.gap.rel_tol), max_rel_err=float(rel.max()))
        far = gap["delta"] >= math.log(2.0) / alpha
        checks["square_mean_not_cauchy"] = _check(np.any(far) and np.all(gap["estimate"][far] > sigma2),
                                                  min_gap=float(gap["estimate"][far].min()) if far.any() else None,
                                                  epsilon=sigma2)
        checks["aa_in_distribution"] = _ratio_check(_cols(out, "path_curve.csv"), limit)
        checks["gap_above_half_sigma2"] = _check(np.all(gap["estimate"] > sigma2 / 2),
                                                 min_gap=float(gap["estimate"].min()))
    elif cfg.scenario == "remark-nonvector":
        checks["z_variance_formula"] = _within_se(
            {**(v := _cols(out, "variance.csv")), "estimate": v["variance"]}, cfg.n_se)
        z = _cols(out, "z_onedim_curve.csv")
        last = float(z["ratio"][np.argmax(z["shift"])])
        checks["z_not_aa_in_distribution"] = _check(last > cfg.min_gap_ratio, ratio=last, threshold=cfg.min_gap_ratio)
        info["x_onedim_max_ratio"] = float(np.max(_cols(out, "x_onedim_curve.csv")["ratio"]))
    elif cfg.scenario == "theorem-aa":
        s = _summary_map(out)
        checks["theta_prime_below_1"] = _check(s["theta_prime"] < 1.0, theta_prime=s["theta_prime"])
        checks.update(_model_checks(s))
        c = _cols(out, "contraction.csv")
        ratios = c["ratio"][np.isfinite(c["ratio"])]
        tail = ratios[len(ratios) // 2:]
        worst = float(tail.max()) if tail.size else 0.0
        checks["contraction"] = _check(worst <= s["theta"] * (1 + s["contraction_slack"]),
                                       tail_max=worst, theta=s["theta"], slack=s["contraction_slack"])
        checks["onedim_flat"] = _ratio_check(_cols(out, "onedim_curve.csv"), limit)
        checks["path_flat"] = _ratio_check(_cols(out, "path_curve.csv"), limit)
        checks["uniform_integrability"] = _ui_check(_cols(out, "ui_profile.csv"), cfg.ui_decay)
        info["bias_bound"] = s["bias_bound"]
    elif cfg.scenario == "theorem-main":
        s = _summary_map(out)
        checks.update(_model_checks(s))
        checks.update(_model_checks(s, "aa_"))
        checks["split_identity"] = _check(s["split_max_deviation"] <= 1e-12, max_deviation=s["split_max_deviation"])
        checks["z_ergodic_decay"] = _decay_check(_cols(out, "ergodic_curve.csv"), cfg.decay_fraction)
        checks["y_path_flat"] = _ratio_check(_cols(out, "y_path_curve.csv"), limit)
        checks["y_onedim_flat"] = _ratio_check(_cols(out, "y_onedim_curve.csv"), limit)
        if cfg.p > 0:
            checks["y_uniform_integrability"] = _ui_check(_cols(out, "ui_profile.csv"), 0.05)
        probe = _cols(out, "shift_probe.csv")
        info["shift_probe_max_ratio"] = float(np.max(probe["ratio"]))
        info["bias_bound"] = s["bias_bound"]
    elif cfg.scenario == "superposition":
        checks["g_onedim_flat"] = _ratio_check(_cols(out, "g_onedim_curve.csv"), limit)
        checks["g_path_flat"] = _ratio_check(_cols(out, "g_path_curve.csv"), limit)
        checks["h_ergodic_decay"] = _decay_check(_cols(out, "h_ergodic_curve.csv"), cfg.decay_fraction)
    return {"scenario": cfg.scenario, "seed": cfg.seed, "checks": checks, "info": info,
            "pass": all(c["pass"] for c in checks.values())}


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)
