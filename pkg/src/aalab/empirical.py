"""Finite empirical measures and the bounded-Lipschitz distance.

For probability measures the bounded-Lipschitz distance is the Kantorovich
distance for the truncated cost ``min(d, 2)``.  ``bl_distance`` solves the
test-function linear program directly (exact LP, HiGHS) whenever that is
cheap, and the equivalent assignment problem for large uniform point clouds
of equal size.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix

from .tables import read_csv, write_csv

METRICS = ("euclidean", "max", "path")
DEFAULT_LEVELS = 3
SMALL_LP = 200


@dataclass(frozen=True)
class PathWindow:
    """Layout of window-sampled path atoms: offsets ``-levels..levels`` on
    step ``h``, state dimension ``dim``; an atom is the flattened
    ``(offsets, dim)`` array."""

    h: float
    levels: int = DEFAULT_LEVELS
    dim: int = 1

    @property
    def per_level(self):
        return int(round(1.0 / self.h))

    @property
    def length(self):
        return 2 * self.levels * self.per_level + 1

    def __post_init__(self):
        if abs(self.per_level * self.h - 1.0) > 1e-9:
            raise ValueError("path windows need 1/h to be an integer")
        if self.levels < 1:
            raise ValueError("need at least one window level")

    def coarsen(self, levels):
        return PathWindow(self.h, levels, self.dim)


class EmpiricalMeasure:
    def __init__(self, support, weights=None, metric="euclidean", window=None):
        support = np.asarray(support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        if support.ndim != 2 or support.shape[0] == 0:
            raise ValueError("support must be a non-empty (n, k) array")
        n = support.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,):
            raise ValueError("one weight per support point")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        if metric == "path":
            if window is None or support.shape[1] != window.length * window.dim:
                raise ValueError("path atoms must match the window layout")
        if not np.all(np.isfinite(support)):
            raise ValueError("support points must be finite")
        self.support = support
        self.weights = weights
        self.metric = metric
        self.window = window

    @property
    def dim(self):
        return self.support.shape[1]

    @property
    def size(self):
        return self.support.shape[0]

    @property
    def uniform(self):
        return bool(np.all(self.weights == self.weights[0]))

    def coalesced(self, tol=1e-9):
        """Merge atoms whose coordinates agree up to ``tol`` (rounded grid)."""
        key = np.round(self.support / tol) if tol > 0 else self.support
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        w = np.bincount(inverse.ravel(), weights=self.weights)
        return EmpiricalMeasure(self.support[first], w / w.sum(), self.metric, self.window)

    def save(self, path):
        header = [f"x{i}" for i in range(self.dim)] + ["weight"]
        write_csv(path, header, np.column_stack([self.support, self.weights]).tolist())

    @classmethod
    def load(cls, path, metric="euclidean", window=None):
        """Coordinate columns plus an optional ``weight`` column (uniform if absent)."""
        cols = read_csv(path)
        w = cols.pop("weight", None)
        if not cols:
            raise ValueError(f"{path}: no coordinate columns")
        pts = np.column_stack([np.asarray(cols[k], dtype=float) for k in cols])
        if w is None:
            return cls(pts, None, metric, window)
        w = np.asarray(w, dtype=float)
        return cls(pts, w / w.sum(), metric, window)


def pairwise(a, b, metric="euclidean", window=None):
    """Distance matrix between the rows of ``a`` and ``b``."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if metric == "euclidean":
        return np.sqrt(np.maximum(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1), 0.0))
    if metric == "max":
        return np.abs(a[:, None, :] - b[None, :, :]).max(-1)
    return _path_pairwise(a, b, window)


def _path_pairwise(a, b, window):
    L, d, c = window.length, window.dim, window.levels * window.per_level
    A = a.reshape(a.shape[0], L, d)
    B = b.reshape(b.shape[0], L, d)
    out = np.zeros((A.shape[0], B.shape[0]))
    rows = max(1, 4_000_000 // max(1, B.shape[0] * L * d))
    for i0 in range(0, A.shape[0], rows):
        diff = A[i0:i0 + rows, None] - B[None]
        norm = np.abs(diff[..., 0]) if d == 1 else np.sqrt((diff**2).sum(-1))
        total = np.zeros(norm.shape[:2])
        for k in range(1, window.levels + 1):
            span = k * window.per_level
            sup = norm[..., c - span:c + span + 1].max(-1)
            total += 0.5**k * np.minimum(sup, 1.0)
        out[i0:i0 + rows] = total
    return out


@dataclass
class BLDistanceResult:
    value: float
    optimizer: np.ndarray | None
    points: np.ndarray | None
    method: str

    def to_dict(self):
        return {
            "value": self.value,
            "method": self.method,
            "points": None if self.points is None else self.points.tolist(),
            "optimizer": None if self.optimizer is None else self.optimizer.tolist(),
        }


def _check_pair(mu, nu):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.metric != nu.metric or mu.window != nu.window:
        raise ValueError("measures use different metrics")


def _union(mu, nu):
    pts, inverse = np.unique(np.vstack([mu.support, nu.support]), axis=0, return_inverse=True)
    signed = np.concatenate([mu.weights, -nu.weights])
    return pts, np.bincount(inverse.ravel(), weights=signed, minlength=pts.shape[0])


def _solve(c, A, b, n):
    res = linprog(-c, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    f = np.clip(res.x, -1.0, 1.0)
    return max(float(c @ f), 0.0), f


def _lp_line(pts, w):
    x = pts[:, 0]
    order = np.argsort(x)
    x, w = x[order], w[order]
    n = x.size
    if n == 1:
        return 0.0, np.zeros(1), x[:, None]
    gaps = np.diff(x)
    rows = np.repeat(np.arange(2 * (n - 1)), 2)
    i = np.arange(n - 1)
    cols = np.column_stack([i + 1, i, i, i + 1]).reshape(-1, 2).ravel()
    vals = np.tile([1.0, -1.0], 2 * (n - 1))
    # rows 2i: f[i+1] - f[i] <= gap, rows 2i+1: f[i] - f[i+1] <= gap
    A = coo_matrix((vals, (rows, cols)), shape=(2 * (n - 1), n)).tocsr()
    value, f = _solve(w, A, np.repeat(gaps, 2), n)
    return value, f, x[:, None]


def _line_flow(pts, w):
    """Exact 1-D value through the dual min-cost flow on the sorted points.

    Mass crosses gap ``i`` at cost ``g_i`` per unit and leaves or enters a
    point through the bound at cost 1.  With ``S_i`` the cumulative bound
    flow and ``C_i`` the cumulative signed weight, the cost is
    ``sum g_i |S_i - C_i| + sum |S_i - S_{i-1}|`` with ``S_0 = S_n = 0``,
    minimised by a convex piecewise-linear DP over ``S`` and backtracking.
    """
    order = np.argsort(pts[:, 0])
    x, w = pts[order, 0], w[order]
    n = x.size
    gaps = np.diff(x)
    C = np.cumsum(w)
    # breakpoints of the DP value function, slopes clamped to [-1, 1]
    pos, jump = [0.0], [2.0]
    regions = [(0.0, 0.0)]
    for i in range(n - 1):
        g, c = float(gaps[i]), float(C[i])
        k = bisect.bisect_left(pos, c)
        pos.insert(k, c)
        jump.insert(k, 2.0 * g)
        lo = _trim(pos, jump, g, 0)
        hi = _trim(pos, jump, g, -1)
        regions.append((lo, hi))
    S = np.zeros(n + 1)
    for k in range(n - 1, -1, -1):
        lo, hi = regions[k]
        S[k] = min(max(S[k + 1], lo), hi)
    value = float(np.sum(gaps * np.abs(S[1:n] - C[:-1])) + np.sum(np.abs(np.diff(S))))
    return max(value, 0.0)


def _trim(pos, jump, excess, end):
    """Remove ``excess`` slope mass from one end; return the position where
    the slope reaches -1 (left end) or +1 (right end)."""
    where = pos[end]
    while excess > 0.0 and pos:
        where = pos[end]
        if jump[end] <= excess:
            excess -= jump[end]
            del pos[end], jump[end]
        else:
            jump[end] -= excess
            excess = 0.0
    return where


def _lp_full(pts, w, metric, window):
    n = pts.shape[0]
    D = pairwise(pts, pts, metric, window)
    i, j = np.nonzero(np.triu(D < 2.0, k=1))
    m = i.size
    if m == 0:
        value, f = float(np.abs(w).sum()), np.sign(w)
        return value, f
    rows = np.repeat(np.arange(2 * m), 2)
    cols = np.column_stack([i, j, j, i]).ravel()
    vals = np.tile([1.0, -1.0], 2 * m)
    A = coo_matrix((vals, (rows, cols)), shape=(2 * m, n)).tocsr()
    return _solve(w, A, np.repeat(D[i, j], 2), n)


def _assignment(mu, nu):
    cost = np.minimum(pairwise(mu.support, nu.support, mu.metric, mu.window), 2.0)
    r, c = linear_sum_assignment(cost)
    return max(float(cost[r, c].sum()) / mu.size, 0.0)


def _transport(mu, nu):
    cost = np.minimum(pairwise(mu.support, nu.support, mu.metric, mu.window), 2.0)
    n, m = cost.shape
    ii, jj = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    var = np.arange(n * m)
    rows = np.concatenate([ii.ravel(), n + jj.ravel()])
    A = coo_matrix((np.ones(2 * n * m), (rows, np.concatenate([var, var]))), shape=(n + m, n * m)).tocsr()
    res = linprog(cost.ravel(), A_eq=A, b_eq=np.concatenate([mu.weights, nu.weights]),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def bl_distance(mu, nu, small=SMALL_LP):
    """Bounded-Lipschitz distance between two empirical measures."""
    _check_pair(mu, nu)
    pts, w = _union(mu, nu)
    if not np.any(w):
        return BLDistanceResult(0.0, np.zeros(pts.shape[0]), pts, "lp")
    if pts.shape[1] == 1 and mu.metric != "path":
        if pts.shape[0] > small:
            return BLDistanceResult(_line_flow(pts, w), None, None, "flow")
        value, f, pts = _lp_line(pts, w)
        return BLDistanceResult(value, f, pts, "lp")
    if pts.shape[0] <= small:
        value, f = _lp_full(pts, w, mu.metric, mu.window)
        return BLDistanceResult(value, f, pts, "lp")
    if mu.uniform and nu.uniform and mu.size == nu.size:
        return BLDistanceResult(_assignment(mu, nu), None, None, "assignment")
    return BLDistanceResult(_transport(mu, nu), None, None, "transport")


def bl_distance_oracle(mu, nu, step=1e-3):
    """Exhaustive grid search over test-function values (union support <= 3).

    The first values run over the grid ``-1, -1+step, ..., 1``; the last one,
    whose objective term is linear, is set to the optimal end of its feasible
    interval given the others.
    """
    _check_pair(mu, nu)
    pts, w = _union(mu, nu)
    n = pts.shape[0]
    if n > 3:
        raise ValueError("oracle handles at most 3 support points")
    D = pairwise(pts, pts, mu.metric, mu.window)
    if n == 1:
        return BLDistanceResult(0.0, np.zeros(1), pts, "oracle")
    grid = np.linspace(-1.0, 1.0, int(round(2.0 / step)) + 1)
    heads = np.meshgrid(*([grid] * (n - 1)), indexing="ij")
    heads = [h.ravel() for h in heads]
    ok = np.ones(heads[0].shape, dtype=bool)
    for a in range(n - 1):
        for b in range(a + 1, n - 1):
            ok &= np.abs(heads[a] - heads[b]) <= D[a, b] + 1e-12
    lo = np.full(heads[0].shape, -1.0)
    hi = np.full(heads[0].shape, 1.0)
    for a in range(n - 1):
        lo = np.maximum(lo, heads[a] - D[a, n - 1])
        hi = np.minimum(hi, heads[a] + D[a, n - 1])
    ok &= lo <= hi + 1e-12
    last = hi if w[-1] >= 0 else lo
    obj = sum(w[a] * heads[a] for a in range(n - 1)) + w[-1] * last
    obj = np.where(ok, obj, -np.inf)
    k = int(np.argmax(obj))
    f = np.array([h[k] for h in heads] + [last[k]])
    return BLDistanceResult(max(float(obj[k]), 0.0), f, pts, "oracle")


def norms(samples):
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        return np.abs(s)
    return np.linalg.norm(s.reshape(s.shape[0], -1), axis=1)


def uniform_integrability_profile(marginals, p, cutoffs):
    """Rows ``(c, sup_marginals mean(|x|^p 1{|x| > c}))``.

    ``marginals`` is a list of sample arrays (``(M,)`` or ``(M, d)``) or
    empirical measures.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    weighted = []
    for m in marginals:
        if isinstance(m, EmpiricalMeasure):
            weighted.append((norms(m.support), m.weights))
        else:
            r = norms(m)
            weighted.append((r, np.full(r.size, 1.0 / r.size)))
    rows = []
    for c in cutoffs:
        worst = max(float(np.sum(w * np.where(r > c, r**p, 0.0))) for r, w in weighted)
        rows.append((float(c), worst))
    return rows


def tightness_modulus(ensemble, window, deltas, eta, recenters):
    """Rows ``(delta, r, P(sup_{|t-s|<delta} |X(r+t) - X(r+s)| > eta))`` with
    ``t, s`` grid points of ``[a, b]``."""
    grid = ensemble.grid
    a, b = window
    rows = []
    for delta in deltas:
        lag_max = int(np.ceil(delta / grid.h - 1e-9)) - 1
        if lag_max < 1:
            raise ValueError(f"delta {delta} does not exceed the grid step {grid.h}")
        for r in recenters:
            i0, i1 = grid.index(r + a), grid.index(r + b)
            x = ensemble.paths[:, i0:i1 + 1, :]
            sup = np.zeros(ensemble.M)
            for lag in range(1, min(lag_max, x.shape[1] - 1) + 1):
                diff = x[:, lag:, :] - x[:, :-lag, :]
                mod = np.abs(diff[..., 0]) if x.shape[2] == 1 else np.linalg.norm(diff, axis=-1)
                sup = np.maximum(sup, mod.max(axis=1))
            rows.append((float(delta), float(r), float(np.mean(sup > eta))))
    return rows
