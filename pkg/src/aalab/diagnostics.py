"""Distribution-level diagnostics on path ensembles.

Every curve compares empirical laws with the bounded-Lipschitz distance and
is judged against a noise floor.  For each of a few random splits of the
paths into disjoint subsamples ``A_k, B_k`` of equal size, the floor uses
``d(A_k at t, B_k at t)`` and the curve ``d(A_k at t, A_k at t + tau)``;
both are averaged over the splits.  The floor of a row is the mean of the
self-distances at ``t`` and ``t + tau``.  A zero shift gives exactly 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .empirical import EmpiricalMeasure, PathWindow, bl_distance, uniform_integrability_profile
from .measures import ergodic_mean_sampled
from .processes import translate
from .tables import write_csv

CAP_LINE = 5000
CAP = 500
SPLITS = 4
SUBSAMPLE_ID = "diagnostic-subsample"


@dataclass
class Protocol:
    """Subsampling settings shared by a curve and its noise floor.
    ``cap_line`` applies to one-dimensional atoms, ``cap`` to all others."""

    seed: int = 0
    cap_line: int = CAP_LINE
    cap: int = CAP
    splits: int = SPLITS

    def cap_for(self, atom_dim):
        return self.cap_line if atom_dim == 1 else self.cap

    def partitions(self, M, atom_dim):
        """``splits`` pairs of disjoint index sets; the first set of the
        first pair is the curve subsample."""
        size = min(self.cap_for(atom_dim), M // 2)
        if size < 1:
            raise ValueError("need at least two paths")
        out = []
        for k in range(self.splits):
            perm = rng.path_generator(self.seed, SUBSAMPLE_ID, k).permutation(M)
            out.append((np.sort(perm[:size]), np.sort(perm[size:2 * size])))
        return out


@dataclass
class DistributionCurve:
    kind: str
    base_times: list
    shifts: list
    d_bl: np.ndarray
    noise_floor: np.ndarray
    spec: dict = field(default_factory=dict)
    ui_profile: list | None = None

    @property
    def ratio(self):
        floor = self.noise_floor
        return np.where(floor > 0, self.d_bl / np.where(floor > 0, floor, 1.0),
                        np.where(self.d_bl > 0, np.inf, 0.0))

    def rows(self):
        r = self.ratio
        return [(float(t), float(s), float(self.d_bl[i, j]), float(self.noise_floor[i, j]), float(r[i, j]))
                for i, t in enumerate(self.base_times) for j, s in enumerate(self.shifts)]

    HEADER = ("base_time", "shift", "d_bl", "noise_floor", "ratio")

    def to_csv(self, path):
        write_csv(path, self.HEADER, self.rows())

    def max_ratio(self):
        return float(np.max(self.ratio)) if self.d_bl.size else 0.0


def _atoms_onedim(ensemble, idx, t):
    return ensemble.paths[idx, ensemble.grid.index(t), :]


def _atoms_tuple(ensemble, idx, times):
    cols = [ensemble.paths[idx, ensemble.grid.index(t), :] for t in times]
    return np.concatenate(cols, axis=1)


def _atoms_path(ensemble, idx, t, window):
    c = ensemble.grid.index(t)
    span = window.levels * window.per_level
    view = translate(ensemble, c, (-span, span + 1))
    return view[idx].reshape(len(idx), -1)


def _curve(kind, ensemble, base_times, shifts, atoms, metric, window, protocol, spec):
    shifts = [float(s) for s in shifts]
    base_times = [float(t) for t in base_times]
    probe = atoms(np.arange(1), base_times[0])
    parts = protocol.partitions(ensemble.M, probe.shape[1])

    def measure(idx, t):
        return EmpiricalMeasure(atoms(idx, t), metric=metric, window=window)

    cache = {}

    def self_distance(t):
        if t not in cache:
            cache[t] = float(np.mean([bl_distance(measure(a, t), measure(b, t)).value for a, b in parts]))
        return cache[t]

    d = np.zeros((len(base_times), len(shifts)))
    floor = np.zeros_like(d)
    for i, t in enumerate(base_times):
        for j, s in enumerate(shifts):
            floor[i, j] = 0.5 * (self_distance(t) + self_distance(t + s))
            if s != 0.0:
                d[i, j] = np.mean([bl_distance(measure(a, t), measure(a, t + s)).value for a, _ in parts])
    spec = {**spec, "subsample": int(parts[0][0].size), "splits": protocol.splits, "seed": protocol.seed}
    return DistributionCurve(kind, base_times, shifts, d, floor, spec)


def onedim_distribution_curve(ensemble, base_times, shifts, protocol=Protocol()):
    return _curve("onedim", ensemble, base_times, shifts,
                  lambda idx, t: _atoms_onedim(ensemble, idx, t),
                  "euclidean", None, protocol, {"marginal": "X(t)"})


def findim_distribution_curve(ensemble, time_tuple, shifts, protocol=Protocol()):
    """Joint law of ``(X(t_1 + tau), ..., X(t_k + tau))`` under the max-coordinate metric."""
    time_tuple = tuple(float(t) for t in time_tuple)
    if not 1 <= len(time_tuple) <= 4:
        raise ValueError("time tuples must have 1 to 4 entries")
    offsets = np.array(time_tuple) - time_tuple[0]
    return _curve("findim", ensemble, [time_tuple[0]], shifts,
                  lambda idx, t: _atoms_tuple(ensemble, idx, t + offsets),
                  "max", None, protocol, {"tuple": list(time_tuple)})


def path_distribution_curve(ensemble, base_times, shifts, levels=3, protocol=Protocol()):
    """Laws of the windows ``X(t + tau + s)``, ``|s| <= levels``, under the
    weighted clipped sup metric."""
    window = PathWindow(ensemble.grid.h, levels, ensemble.dim)
    return _curve("path", ensemble, base_times, shifts,
                  lambda idx, t: _atoms_path(ensemble, idx, t, window),
                  "path", window, protocol, {"levels": levels})


def path_distance(ensemble, t, tau, levels, protocol=Protocol()):
    """Path-space distance between the first subsample at ``t`` and at ``t + tau``."""
    window = PathWindow(ensemble.grid.h, levels, ensemble.dim)
    S = protocol.partitions(ensemble.M, 2)[0][0]
    a = EmpiricalMeasure(_atoms_path(ensemble, S, t, window), metric="path", window=window)
    b = EmpiricalMeasure(_atoms_path(ensemble, S, t + tau, window), metric="path", window=window)
    return bl_distance(a, b).value


def consistency_relation_check(ensemble, t, levels=1, protocol=Protocol()):
    """Law of the translated window vs the index-shift push-forward of the
    unshifted paths; both are the same data, so the distance must be 0."""
    grid = ensemble.grid
    window = PathWindow(grid.h, levels, ensemble.dim)
    span = levels * window.per_level
    j = grid.lag(t)
    centre = span
    S = protocol.partitions(ensemble.M, 2)[0][0]
    shifted = translate(ensemble, j, (centre - span, centre + span + 1))[S]
    index_map = np.arange(centre - span, centre + span + 1) + j
    pushed = np.take(ensemble.paths[S], index_map, axis=1)
    a = EmpiricalMeasure(shifted.reshape(S.size, -1), metric="path", window=window)
    b = EmpiricalMeasure(pushed.reshape(S.size, -1), metric="path", window=window)
    value = bl_distance(a, b).value
    mismatch = float(np.max(np.abs(shifted - pushed)))
    if value != 0.0 or mismatch != 0.0:
        raise AssertionError(f"translation plumbing broken: d_BL={value}, max mismatch={mismatch}")
    return {"t": float(t), "d_bl": value, "max_mismatch": mismatch, "pass": True}


def pth_mean_curve(diff, p):
    """``t -> (E|Z(t)|^p)^{1/p}`` (``p > 0``) or ``E min(|Z(t)|, 1)`` (``p = 0``)."""
    norms = np.linalg.norm(diff, axis=-1)
    if p == 0:
        return np.mean(np.minimum(norms, 1.0), axis=0)
    return np.mean(norms**p, axis=0) ** (1.0 / p)


def paa_p_distribution_check(X, Y, p, mu, radii, shifts, base_times=(0.0,), levels=3,
                             ui_cutoffs=(0.0, 1.0, 2.0, 3.0, 4.0), ui_stride=20, protocol=Protocol()):
    """Split ``X = Y + Z`` pathwise and test the two parts.

    Returns a dict with the ergodic mean curve of the p-th mean of ``Z``,
    the path and one-dimensional distribution curves of ``Y``, and (for
    ``p > 0``) the uniform-integrability profile of ``|Y(t)|^p`` over the grid.
    """
    if X.grid != Y.grid or X.paths.shape != Y.paths.shape:
        raise ValueError("X and Y must share grid, dimension and path count")
    if p < 0:
        raise ValueError("p must be nonnegative")
    Z = X.paths - Y.paths
    zmean = pth_mean_curve(Z, p)
    curve = ergodic_mean_sampled(X.grid.times, zmean, mu, radii)
    path_curve = path_distribution_curve(Y, base_times, shifts, levels, protocol)
    one_curve = onedim_distribution_curve(Y, base_times, shifts, protocol)
    ui = None
    if p > 0:
        marginals = [Y.paths[:, j, :] for j in range(0, Y.grid.n + 1, ui_stride)]
        ui = uniform_integrability_profile(marginals, p, ui_cutoffs)
    return {
        "z_times": X.grid.times,
        "z_pth_mean": zmean,
        "ergodic_curve": curve,
        "path_curve": path_curve,
        "onedim_curve": one_curve,
        "ui_profile": ui,
    }


def cross_path_curve(A, tA, B, tB, levels=3, protocol=Protocol()):
    """Path-space distance between the laws of ``A`` at ``tA`` and ``B`` at
    ``tB`` (independent ensembles of equal size), with ``B``'s split-half
    floor at ``tB``."""
    window = PathWindow(A.grid.h, levels, A.dim)
    if B.grid.h != A.grid.h or B.M != A.M:
        raise ValueError("ensembles must share the step and the path count")
    parts = protocol.partitions(A.M, 2)
    S = parts[0][0]

    def measure(E, idx, t):
        return EmpiricalMeasure(_atoms_path(E, idx, t, window), metric="path", window=window)

    d = bl_distance(measure(A, S, tA), measure(B, S, tB)).value
    floor = float(np.mean([bl_distance(measure(B, a, tB), measure(B, b, tB)).value for a, b in parts]))
    return d, floor
