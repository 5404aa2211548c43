"""Weight measures on the real line and weighted ergodic means.

A :class:`WeightMeasure` is a nonnegative density.  Masses and weighted
means share one quadrature (:mod:`aalab.quadrature`), so ratios of the two
see the same discretisation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .functions import Expr, Sampled, as_expr


class InvalidMeasureError(ValueError):
    pass


@dataclass(frozen=True)
class WeightMeasure:
    """Borel measure with a density.

    ``eq_mu_valid`` marks catalog entries whose total mass is infinite.
    """

    density_fn: object
    description: str
    params: dict = field(default_factory=dict)
    eq_mu_valid: bool = False

    def density(self, t):
        t = np.asarray(t, dtype=float)
        d = np.asarray(self.density_fn(t), dtype=float)
        d = np.broadcast_to(d, t.shape)
        if not np.all(np.isfinite(d)):
            raise InvalidMeasureError(f"{self.description}: non-finite density sample")
        if np.any(d < 0):
            raise InvalidMeasureError(f"{self.description}: negative density sample")
        return d

    def to_dict(self):
        return {"name": self.description, **self.params}


def lebesgue():
    return WeightMeasure(lambda t: np.ones_like(t), "lebesgue", {}, True)


def polynomial(k):
    """Density ``1 + |t|^k``."""
    if k < 0:
        raise InvalidMeasureError("polynomial weight needs k >= 0")
    k = float(k)
    return WeightMeasure(lambda t: 1.0 + np.abs(t) ** k, "polynomial", {"k": k}, True)


def exp_window(a):
    """Density ``exp(-a|t|) + 1``."""
    if a < 0:
        raise InvalidMeasureError("exp_window needs a >= 0")
    a = float(a)
    return WeightMeasure(lambda t: np.exp(-a * np.abs(t)) + 1.0, "exp_window", {"a": a}, True)


def from_grid(times, values):
    """Piecewise-linear density through grid samples (held constant outside)."""
    s = Sampled(times, values)
    if np.any(s.values < 0):
        raise InvalidMeasureError("grid density must be nonnegative")
    return WeightMeasure(s, "grid", {"times": s.times.tolist(), "values": s.values.tolist()}, False)


def custom(density, description="custom"):
    """Density from a callable or an expression (tree or text)."""
    if isinstance(density, (str, Expr)):
        expr = as_expr(density)
        return WeightMeasure(expr, description, {"density": str(expr)}, False)
    return WeightMeasure(density, description, {}, False)


def from_config(spec):
    """Catalog lookup, e.g. ``{"name": "polynomial", "k": 2}``."""
    spec = dict(spec)
    name = spec.pop("name")
    if name == "lebesgue":
        m = lebesgue()
    elif name == "polynomial":
        m = polynomial(spec.pop("k"))
    elif name == "exp_window":
        m = exp_window(spec.pop("a"))
    elif name == "grid":
        m = from_grid(spec.pop("times"), spec.pop("values"))
    elif name == "custom":
        m = custom(spec.pop("density"))
    else:
        raise InvalidMeasureError(f"unknown measure {name!r}")
    if spec:
        raise InvalidMeasureError(f"unexpected measure parameters {sorted(spec)}")
    return m


def _piece_integrals(fn, edges):
    vals, converged = quadrature.integrate_pieces(fn, edges)
    return vals


def interval_mass(mu, a, b):
    """``mu([a, b])``."""
    if b < a:
        raise ValueError("interval reversed")
    return quadrature.integrate(mu.density, a, b)


def mass(mu, r):
    """``mu([-r, r])``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    return interval_mass(mu, -r, r)


def union_mass(mu, intervals, shift=0.0):
    """Mass of a finite union of (assumed disjoint) intervals, optionally translated."""
    return sum(interval_mass(mu, a + shift, b + shift) for a, b in intervals)


@dataclass
class ErgodicMeanCurve:
    radii: np.ndarray
    values: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)

    def rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]

    def to_csv(self, path):
        from .tables import write_csv

        write_csv(path, ["r", "value"], self.rows())

    def value_at(self, r):
        idx = np.flatnonzero(np.isclose(self.radii, r))
        if idx.size == 0:
            raise KeyError(r)
        return float(self.values[idx[0]])


def _check_radii(radii):
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a non-empty list")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    return radii


def weighted_integrals(fn, mu, radii):
    """``(int_{[-r,r]} fn dmu, mu([-r,r]))`` for every radius, sharing one panelisation."""
    radii = _check_radii(radii)
    R = radii[-1]
    edges = quadrature.unit_edges(-R, R, np.concatenate([radii, -radii]))
    num = np.concatenate([[0.0], np.cumsum(_piece_integrals(lambda t: fn(t) * mu.density(t), edges))])
    den = np.concatenate([[0.0], np.cumsum(_piece_integrals(mu.density, edges))])
    hi = np.searchsorted(edges, radii)
    lo = np.searchsorted(edges, -radii)
    return num[hi] - num[lo], den[hi] - den[lo]


def ergodic_mean(f, mu, radii, clip=False):
    """Curve of ``(1/mu([-r,r])) int_{[-r,r]} |f| dmu`` (``|f| ^ 1`` when ``clip``)."""
    f = as_expr(f) if not callable(f) else f

    def integrand(t):
        v = np.abs(np.asarray(f(t), dtype=float))
        if v.ndim > np.ndim(t):
            v = np.linalg.norm(v, axis=-1)
        v = np.broadcast_to(v, np.shape(t))
        return np.minimum(v, 1.0) if clip else v

    num, den = weighted_integrals(integrand, mu, radii)
    if np.any(den <= 0):
        raise InvalidMeasureError(f"{mu.description}: zero mass on a probed interval")
    return ErgodicMeanCurve(_check_radii(radii), num / den, clip)


def ergodic_mean_sampled(times, values, mu, radii, clip=False):
    """Ergodic mean curve of grid samples by the trapezoid rule.

    Numerator and denominator use the same grid rule.  The grid must cover
    ``[-max r, max r]``.
    """
    times = np.asarray(times, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    radii = _check_radii(radii)
    if times[0] > -radii[-1] + 1e-9 * max(1.0, radii[-1]) or times[-1] < radii[-1] - 1e-9 * max(1.0, radii[-1]):
        raise ValueError("sample grid does not cover [-r, r] for the largest radius")
    if clip:
        values = np.minimum(values, 1.0)
    # grid points that miss +-r only by rounding still belong to the window
    slack = 1e-6 * float(np.min(np.diff(times)))
    out = []
    for r in radii:
        sel = (times >= -r - slack) & (times <= r + slack)
        tt = times[sel]
        w = mu.density(tt)
        den = np.trapezoid(w, tt)
        out.append(np.trapezoid(values[sel] * w, tt) / den)
    return ErgodicMeanCurve(radii, np.array(out), clip)


def check_eq_mu(mu, radii=(1e2, 1e3, 1e4), bound=1e3):
    """Numeric evidence for ``mu(R) = inf`` and finite mass on bounded sets."""
    masses = [mass(mu, r) for r in radii]
    finite = all(math.isfinite(m) for m in masses)
    increasing = all(b > a for a, b in zip(masses, masses[1:]))
    return {
        "radii": list(map(float, radii)),
        "masses": masses,
        "finite": finite,
        "increasing": increasing,
        "exceeds_bound": masses[-1] > bound,
        "pass": finite and increasing and masses[-1] > bound,
    }


@dataclass
class ConditionHReport:
    """Sampled check of the translation condition on probe sets.

    This is a necessary-condition test: ``refuted`` means some probed ratio
    was infinite; ``not refuted`` proves nothing about unprobed sets.
    """

    taus: list
    ratios: list
    passed: list
    notices: list
    central_interval: tuple

    @property
    def verdict(self):
        return "not refuted on probes" if all(self.passed) else "refuted"


def check_condition_H(mu, taus, probes, central=(-1.0, 1.0), max_ratio=math.inf):
    """For each shift, ``sup_A mu(A+tau)/mu(A)`` over probe sets avoiding ``central``.

    A probe is an interval ``(a, b)`` or a list of disjoint intervals.
    """
    c0, c1 = central
    accepted = []
    notices = []
    for probe in probes:
        intervals = [tuple(probe)] if np.isscalar(probe[0]) else [tuple(p) for p in probe]
        if any(a < c1 and b > c0 for a, b in intervals):
            notices.append(f"probe {intervals} intersects central interval {central}; rejected")
            continue
        accepted.append(intervals)
    ratios, passed = [], []
    for tau in taus:
        worst = 0.0
        for intervals in accepted:
            base = union_mass(mu, intervals)
            moved = union_mass(mu, intervals, tau)
            ratio = moved / base if base > 0 else (math.inf if moved > 0 else 1.0)
            worst = max(worst, ratio)
        ratios.append(worst)
        passed.append(math.isfinite(worst) and worst <= max_ratio)
    return ConditionHReport(list(map(float, taus)), ratios, passed, notices, (c0, c1))


def check_R_plus(mu, radii, floor=0.05):
    """``mu([0,r]) / mu([-r,r])`` per radius and its minimum."""
    radii = _check_radii(radii)
    ratios = [interval_mass(mu, 0.0, r) / mass(mu, r) for r in radii]
    lowest = min(ratios)
    return {"radii": radii.tolist(), "ratios": ratios, "min": lowest, "floor": floor, "pass": lowest > floor}


@dataclass
class VanishingSequence:
    times: list
    values: list
    tolerances: list
    complete: bool
    diagnostic: str = ""


def find_vanishing_sequence(f, mu, horizon, count, tol0=0.1, step=0.01):
    """Scan forward on ``[0, horizon]`` for times where ``|f|`` drops below
    ``tol0 * 10**-k``, ``k = 0..count-1``, each time later than the previous."""
    if count < 1:
        raise ValueError("count must be positive")
    f = as_expr(f) if not callable(f) else f
    probe = horizon * np.array([0.01, 0.1, 1.0])
    curve = ergodic_mean(f, mu, probe)
    if not np.all(np.diff(curve.values) <= 1e-12):
        warnings.warn("ergodic mean does not decay over the probed radii", RuntimeWarning, stacklevel=2)
    grid = np.arange(0.0, horizon + 0.5 * step, step)
    vals = np.abs(np.asarray(f(grid), dtype=float))
    vals = np.broadcast_to(vals, grid.shape)
    times, found, tols = [], [], []
    start = 0
    for k in range(count):
        tol = tol0 * 10.0 ** (-k)
        hits = np.flatnonzero(vals[start:] < tol)
        if hits.size == 0:
            return VanishingSequence(times, found, tols, False,
                                     f"horizon {horizon} exhausted looking for |f| < {tol:g}")
        j = start + hits[0]
        times.append(float(grid[j]))
        found.append(float(vals[j]))
        tols.append(tol)
        start = j + 1
    return VanishingSequence(times, found, tols, True)
