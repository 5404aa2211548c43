"""Finite numerical proxies for almost periodicity and almost automorphy.

The definitions quantify over every real sequence; these tests only look at
a user-supplied finite shift sequence on a finite window grid.  A verdict is
therefore either "refutes" (with a witness) or "consistent-with", never a
certificate of membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import as_expr
from .measures import ergodic_mean

HEADER = ("finite proxy on a user-supplied shift sequence and window grid: "
          "'consistent-with' is corroboration, not proof")
WITNESS_CAP = 100
CAUCHY_TAIL = 3


@dataclass
class RecurrenceReport:
    test: str
    verdict: str
    params: dict
    witness: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    header: str = HEADER

    def __post_init__(self):
        if self.verdict not in ("consistent-with", "refutes"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "refutes" and not self.witness:
            raise ValueError("a refuting report must carry a witness")

    @property
    def consistent(self):
        return self.verdict == "consistent-with"

    def to_dict(self):
        return {"test": self.test, "verdict": self.verdict, "header": self.header,
                "params": self.params, "witness": self.witness, "data": self.data}


def _capped(pairs):
    pairs = [list(map(float, p)) if np.ndim(p) else float(p) for p in pairs]
    return {"count": len(pairs), "items": pairs[:WITNESS_CAP]}


def _dist(a, b):
    diff = np.asarray(a) - np.asarray(b)
    return np.abs(diff)


def _window_grid(window, step):
    t0, t1 = window
    if not t1 > t0 or not step > 0:
        raise ValueError("window must be increasing and grid step positive")
    n = int(round((t1 - t0) / step))
    return t0 + step * np.arange(n + 1)


def almost_period_scan(f, epsilon, window, shift_range, shift_step, grid_step=0.01,
                       density_length=None):
    """Shifts ``tau`` on a grid with ``sup_window |f(t+tau) - f(t)| <= epsilon``.

    ``density_length`` (default: a tenth of the shift range) is the length
    ``l`` for which every ``[a, a+l]`` inside the range must contain a found
    shift for the verdict "consistent-with".
    """
    f = as_expr(f)
    lo, hi = shift_range
    if not shift_step > 0 or hi < lo:
        raise ValueError("empty shift grid")
    shifts = lo + shift_step * np.arange(int(np.floor((hi - lo) / shift_step + 1e-9)) + 1)
    if shifts.size == 0:
        raise ValueError("empty shift grid")
    ts = _window_grid(window, grid_step)
    base = np.broadcast_to(f(ts), ts.shape)
    worst = np.empty(shifts.size)
    for chunk in np.array_split(np.arange(shifts.size), max(1, shifts.size * ts.size // 2_000_000)):
        vals = np.broadcast_to(f(ts[None, :] + shifts[chunk, None]), (chunk.size, ts.size))
        worst[chunk] = _dist(vals, base[None, :]).max(axis=1)
    found = shifts[worst <= epsilon]
    ell = (hi - lo) / 10.0 if density_length is None else float(density_length)
    # gaps include the stretches before the first and after the last found shift
    marks = np.concatenate([[lo], found, [hi]])
    gaps = np.diff(marks)
    largest_gap = float(np.diff(found).max()) if found.size > 1 else float("inf")
    params = {"epsilon": epsilon, "window": list(window), "shift_range": [lo, hi],
              "shift_step": shift_step, "grid_step": grid_step, "density_length": ell}
    data = {"shifts": _capped(found), "largest_gap": largest_gap}
    bad = np.flatnonzero(gaps > ell + 1e-12)
    if bad.size:
        witness = {"uncovered": _capped([(marks[i], marks[i + 1]) for i in bad])}
        return RecurrenceReport("almost_period_scan", "refutes", params, witness, data)
    return RecurrenceReport("almost_period_scan", "consistent-with", params, {}, data)


def almost_period_shifts(f, epsilon, window, shift_range, shift_step, grid_step=0.01):
    """The full array of qualifying shifts (no witness cap)."""
    f = as_expr(f)
    lo, hi = shift_range
    shifts = lo + shift_step * np.arange(int(np.floor((hi - lo) / shift_step + 1e-9)) + 1)
    ts = _window_grid(window, grid_step)
    base = np.broadcast_to(f(ts), ts.shape)
    vals = np.broadcast_to(f(ts[None, :] + shifts[:, None]), (shifts.size, ts.size))
    return shifts[_dist(vals, base[None, :]).max(axis=1) <= epsilon]


def _shift_table(f, shifts, window, grid_step):
    shifts = np.asarray(shifts, dtype=float)
    if shifts.ndim != 1 or shifts.size < 4:
        raise ValueError("need at least 4 shifts")
    f = as_expr(f)
    ts = _window_grid(window, grid_step)
    vals = np.broadcast_to(f(ts[None, :] + shifts[:, None]), (shifts.size, ts.size))
    return f, shifts, ts, np.asarray(vals, dtype=float)


def _return_values(f, shifts, ts):
    # g(u) ~ f(u + s_N); the return test compares g(t - s_n) with f(t) on the tail
    last = shifts[-1]
    tail = shifts[-CAUCHY_TAIL:-1]
    back = np.broadcast_to(f(ts[None, :] + (last - tail)[:, None]), (tail.size, ts.size))
    return tail, back


def aa_double_shift_test(f, shifts, window=(-10.0, 10.0), grid_step=0.01, tol=0.05):
    """Pointwise double-shift test.

    ``g(t)`` is the value of ``f(t + s_n)`` at the deepest shift; the tail is
    Cauchy at ``t`` when its last three values lie within ``tol``.  The return
    test checks ``|g(t - s_n) - f(t)| <= tol`` for the tail shifts.
    """
    f, shifts, ts, vals = _shift_table(f, shifts, window, grid_step)
    tail_vals = vals[-CAUCHY_TAIL:]
    osc = tail_vals.max(axis=0) - tail_vals.min(axis=0)
    g_hat = vals[-1]
    base = np.broadcast_to(f(ts), ts.shape)
    tail, back = _return_values(f, shifts, ts)
    ret = _dist(back, base[None, :]).max(axis=0)
    pointwise_modulus = _dist(vals, g_hat[None, :]).max(axis=0)
    params = {"shifts": shifts.tolist(), "window": list(window), "grid_step": grid_step, "tol": tol}
    data = {
        "worst_cauchy_oscillation": float(osc.max()),
        "worst_return_error": float(ret.max()),
        "worst_pointwise_modulus": float(pointwise_modulus.max()),
        "g_hat_range": [float(g_hat.min()), float(g_hat.max())],
    }
    witness = {}
    bad = np.flatnonzero(osc > tol)
    if bad.size:
        witness["non_cauchy"] = _capped([(ts[i], osc[i]) for i in bad])
    bad = np.flatnonzero(ret > tol)
    if bad.size:
        witness["return_fails"] = _capped([(ts[i], ret[i]) for i in bad])
    verdict = "refutes" if witness else "consistent-with"
    return RecurrenceReport("aa_double_shift_test", verdict, params, witness, data)


def compact_aa_uniformity(f, shifts, window=(-10.0, 10.0), grid_step=0.01, tol=0.05):
    """Uniform variant: the moduli are sups over the whole window, per shift.

    ``uniform_modulus[n] = sup_t |f(t + s_n) - g(t)|`` for every shift; the
    Cauchy criterion is on the pairwise uniform distances of the last three
    shifted copies, the return criterion on ``sup_t |g(t - s_n) - f(t)|``.
    """
    f, shifts, ts, vals = _shift_table(f, shifts, window, grid_step)
    g_hat = vals[-1]
    modulus = _dist(vals, g_hat[None, :]).max(axis=1)
    tail_vals = vals[-CAUCHY_TAIL:]
    pair = max(float(_dist(tail_vals[i], tail_vals[j]).max())
               for i in range(CAUCHY_TAIL) for j in range(i + 1, CAUCHY_TAIL))
    base = np.broadcast_to(f(ts), ts.shape)
    tail, back = _return_values(f, shifts, ts)
    ret = _dist(back, base[None, :]).max(axis=1)
    params = {"shifts": shifts.tolist(), "window": list(window), "grid_step": grid_step, "tol": tol}
    data = {"uniform_modulus": modulus.tolist(), "uniform_cauchy": pair,
            "uniform_return": ret.tolist()}
    witness = {}
    if pair > tol:
        i = int(np.argmax(_dist(tail_vals, g_hat[None, :]).max(axis=0)))
        witness["non_uniform_cauchy"] = {"sup": pair, "at_t": float(ts[i])}
    bad = np.flatnonzero(ret > tol)
    if bad.size:
        witness["return_fails"] = _capped([(tail[i], ret[i]) for i in bad])
    verdict = "refutes" if witness else "consistent-with"
    return RecurrenceReport("compact_aa_uniformity", verdict, params, witness, data)


def paa_residual_test(f, g_candidate, mu, radii):
    """Clipped ergodic mean curve of ``|f - g_candidate|`` under ``mu``."""
    f, g = as_expr(f), as_expr(g_candidate)
    return ergodic_mean(lambda t: _dist(f(t), g(t)), mu, radii, clip=True)
