"""Stepanov, weighted Stepanov, Weyl and Besicovitch seminorms.

Sups over the real line are taken over finite grids (lower bounds of the
true sup); limits in the window radius are read off an increasing ladder of
radii.  Weyl takes the sup over centres inside each radius, then the ladder
limit; Besicovitch uses windows centred at 0 and approximates the limsup by
the max over the last half of the ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .functions import as_expr

KINDS = ("stepanov", "stepanov_weighted", "weyl", "besicovitch")


@dataclass(frozen=True)
class SeminormKind:
    kind: str
    p: float
    nu: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown seminorm kind {self.kind!r}")
        if not self.p > 0:
            raise ValueError("exponent p must be positive")
        if self.kind == "stepanov_weighted":
            if self.nu is None:
                raise ValueError("weighted Stepanov needs a measure on [0, 1]")
            total = quadrature.integrate(self.nu.density, 0.0, 1.0)
            if not 0.0 < total < np.inf:
                raise ValueError("weight on [0, 1] must have finite positive mass")


def stepanov(p):
    return SeminormKind("stepanov", p)


def stepanov_weighted(p, nu):
    return SeminormKind("stepanov_weighted", p, nu)


def weyl(p):
    return SeminormKind("weyl", p)


def besicovitch(p):
    return SeminormKind("besicovitch", p)


@dataclass(frozen=True)
class Scan:
    """Grids for sups and radius ladders.  ``dt`` is the sampling step used
    for windowed means."""

    t_span: tuple = (-1000.0, 1000.0)
    t_step: float = 0.25
    ladder: tuple = (10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0)
    x_span: tuple = (-1000.0, 1000.0)
    x_step: float = 0.25
    dt: float = 0.01
    rtol: float = 1e-3
    panels: int = 16


@dataclass
class SeminormResult:
    kind: str
    p: float
    value: float
    converged: bool
    trace: list = field(default_factory=list)
    extrapolated: float | None = None

    @property
    def tolerance(self):
        """Gap between the reported value and the extrapolated ladder limit."""
        if self.extrapolated is None:
            return 0.0
        return abs(self.value - self.extrapolated)

    @property
    def zero_within_tolerance(self):
        if self.extrapolated is None:
            return self.value == 0.0
        return self.extrapolated <= max(self.tolerance, 1e-12)

    def to_dict(self):
        return {
            "kind": self.kind,
            "p": self.p,
            "value": self.value,
            "converged": self.converged,
            "trace": [[float(r), float(v)] for r, v in self.trace],
            "extrapolated": self.extrapolated,
            "tolerance": self.tolerance,
        }


def _abs_p(h, t, p):
    v = np.asarray(h(t), dtype=float)
    if v.ndim > np.ndim(t):
        v = np.linalg.norm(v, axis=-1)
    return np.broadcast_to(np.abs(v), np.shape(t)) ** p


def stepanov_local(h, t, p, nu=None):
    """``(int_t^{t+1} |h(s)|^p ds)^{1/p}``, or against ``dnu(s - t)``."""
    h = as_expr(h) if not callable(h) else h
    if nu is None:
        integrand = lambda s: _abs_p(h, s, p)
    else:
        integrand = lambda s: _abs_p(h, s, p) * nu.density(s - t)
    total = quadrature.integrate(integrand, float(t), float(t) + 1.0)
    return max(total, 0.0) ** (1.0 / p)


def _stepanov_sup(h, p, nu, scan):
    ts = np.arange(scan.t_span[0], scan.t_span[1] + 0.5 * scan.t_step, scan.t_step)
    # composite Gauss-Legendre on [0, 1]
    gx, gw = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, 1.0, scan.panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = ((edges[:-1] + half)[:, None] + half[:, None] * gx).ravel()
    weights = (half[:, None] * gw).ravel()
    if nu is not None:
        weights = weights * nu.density(nodes)
    best = 0.0
    for chunk in np.array_split(ts, max(1, ts.size // 2000)):
        vals = _abs_p(h, chunk[:, None] + nodes[None, :], p) @ weights
        best = max(best, float(vals.max()))
    return best ** (1.0 / p)


def _cumulative(h, p, lo, hi, dt):
    grid = np.arange(lo, hi + 0.5 * dt, dt)
    vals = _abs_p(h, grid, p)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (vals[1:] + vals[:-1]))])
    return grid, cum


def _extrapolate(ladder, means_p, p):
    r1, r2 = ladder[-2], ladder[-1]
    limit = (r2 * means_p[-1] - r1 * means_p[-2]) / (r2 - r1)
    return max(limit, 0.0) ** (1.0 / p)


def _weyl(h, p, scan):
    ladder = np.asarray(scan.ladder, dtype=float)
    R = ladder[-1]
    xs = np.arange(scan.x_span[0], scan.x_span[1] + 0.5 * scan.x_step, scan.x_step)
    grid, cum = _cumulative(h, p, xs[0] - R, xs[-1] + R, scan.dt)
    means = []
    for r in ladder:
        integral = np.interp(xs + r, grid, cum) - np.interp(xs - r, grid, cum)
        means.append(float(np.max(integral)) / (2.0 * r))
    return ladder, np.maximum(means, 0.0)


def _besicovitch(h, p, scan):
    ladder = np.asarray(scan.ladder, dtype=float)
    R = ladder[-1]
    grid, cum = _cumulative(h, p, -R, R, scan.dt)
    integral = np.interp(ladder, grid, cum) - np.interp(-ladder, grid, cum)
    return ladder, np.maximum(integral / (2.0 * ladder), 0.0)


def seminorm(h, kind, scan=Scan()):
    h = as_expr(h) if not callable(h) else h
    p = kind.p
    if kind.kind in ("stepanov", "stepanov_weighted"):
        value = _stepanov_sup(h, p, kind.nu, scan)
        return SeminormResult(kind.kind, p, value, True, [])
    if len(scan.ladder) < 2 or np.any(np.diff(scan.ladder) <= 0):
        raise ValueError("radius ladder must be increasing with at least two entries")
    if kind.kind == "weyl":
        ladder, means_p = _weyl(h, p, scan)
        estimates = means_p ** (1.0 / p)
        value = float(estimates[-1])
    else:
        ladder, means_p = _besicovitch(h, p, scan)
        estimates = means_p ** (1.0 / p)
        tail = estimates[len(estimates) // 2:]
        value = float(tail.max())
    converged = abs(estimates[-1] - estimates[-2]) < scan.rtol * max(abs(estimates[-1]), 1e-300)
    trace = list(zip(ladder.tolist(), estimates.tolist()))
    return SeminormResult(kind.kind, p, value, bool(converged), trace, _extrapolate(ladder, means_p, p))


def seminorm_ordering_check(h, p, scan=Scan(), slack=1e-9):
    """Stepanov >= Weyl >= Besicovitch, each comparison allowing the ladder
    tolerance of the quantities involved."""
    s = seminorm(h, stepanov(p), scan)
    w = seminorm(h, weyl(p), scan)
    b = seminorm(h, besicovitch(p), scan)
    # same radius: the centred window is one of the Weyl windows
    per_radius = all(wv >= bv - slack for (_, wv), (_, bv) in zip(w.trace, b.trace))
    s_ge_w = s.value >= w.value - w.tolerance - slack
    w_ge_b = w.value >= b.value - max(w.tolerance, b.tolerance) - slack
    return {
        "p": p,
        "stepanov": s.value,
        "weyl": w.value,
        "besicovitch": b.value,
        "weyl_tolerance": w.tolerance,
        "besicovitch_tolerance": b.tolerance,
        "stepanov_ge_weyl": bool(s_ge_w),
        "weyl_ge_besicovitch": bool(w_ge_b),
        "per_radius_weyl_ge_besicovitch": bool(per_radius),
        "pass": bool(s_ge_w and w_ge_b and per_radius),
    }
