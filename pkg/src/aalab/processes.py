"""Path ensembles: exact stationary Ornstein-Uhlenbeck sampling, Brownian
increments, translation and pathwise sums."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    h: float
    n: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid step must be positive")
        if self.n < 0:
            raise ValueError("grid count must be nonnegative")

    @property
    def times(self):
        return self.t0 + self.h * np.arange(self.n + 1)

    @property
    def t1(self):
        return self.t0 + self.h * self.n

    def index(self, t):
        """Grid index of time ``t``; raises if ``t`` is off-grid or outside."""
        j = round((t - self.t0) / self.h)
        if abs(self.t0 + j * self.h - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the grid")
        if not 0 <= j <= self.n:
            raise IndexError(f"time {t} outside [{self.t0}, {self.t1}]")
        return int(j)

    def lag(self, tau):
        """Index offset for a time lag that is a multiple of ``h``."""
        j = round(tau / self.h)
        if abs(j * self.h - tau) > 1e-9 * max(1.0, abs(tau)):
            raise ValueError(f"lag {tau} is not a multiple of the step {self.h}")
        return int(j)

    def to_dict(self):
        return {"t0": self.t0, "h": self.h, "n": self.n}


@dataclass
class PathEnsemble:
    grid: TimeGrid
    paths: np.ndarray
    seed: int
    generator_id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.paths.ndim == 2:
            self.paths = self.paths[:, :, None]
        if self.paths.ndim != 3 or self.paths.shape[1] != self.grid.n + 1:
            raise ValueError("paths must have shape (M, n+1, d) matching the grid")

    @property
    def M(self):
        return self.paths.shape[0]

    @property
    def dim(self):
        return self.paths.shape[2]

    def at(self, t):
        """Values at time ``t``, shape ``(M, d)``."""
        return self.paths[:, self.grid.index(t), :]

    def header(self):
        return {"grid": self.grid.to_dict(), "dim": self.dim, "M": self.M,
                "seed": int(self.seed), "generator_id": self.generator_id, "params": self.params}

    def save(self, path):
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(self.header(), sort_keys=True)), paths=self.paths)


class EnsembleHeaderError(ValueError):
    pass


def load_ensemble(path, **expected):
    """Load an ensemble, checking header fields against ``expected``
    (any of ``grid``, ``dim``, ``M``, ``seed``, ``generator_id``)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        paths = data["paths"]
    for key, want in expected.items():
        have = header.get(key)
        if isinstance(want, TimeGrid):
            want = want.to_dict()
        if have != want:
            raise EnsembleHeaderError(f"header field {key!r} is {have!r}, expected {want!r}")
    if paths.shape != (header["M"], header["grid"]["n"] + 1, header["dim"]):
        raise EnsembleHeaderError("stored array does not match its header")
    return PathEnsemble(TimeGrid(**header["grid"]), paths, header["seed"], header["generator_id"],
                        header.get("params", {}))


@dataclass(frozen=True)
class OuParams:
    alpha: float
    sigma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma > 0):
            raise ValueError("OU parameters must be positive")

    def decay(self, h):
        return float(np.exp(-self.alpha * h))

    def step_variance(self, h):
        return float(self.sigma**2 * -np.expm1(-2.0 * self.alpha * h))

    def covariance(self, tau):
        return self.sigma**2 * np.exp(-self.alpha * np.abs(tau))


def simulate_ou(params, grid, M, seed, generator_id="ou"):
    """Exact stationary OU: ``X_0 ~ N(0, sigma^2)``,
    ``X_{j+1} = e^{-alpha h} X_j + N(0, sigma^2 (1 - e^{-2 alpha h}))``."""
    z = rng.normals(seed, generator_id, M, (grid.n + 1,))
    rho = params.decay(grid.h)
    s = np.sqrt(params.step_variance(grid.h))
    x = np.empty_like(z)
    x[:, 0] = params.sigma * z[:, 0]
    for j in range(grid.n):
        x[:, j + 1] = rho * x[:, j] + s * z[:, j + 1]
    return PathEnsemble(grid, x[:, :, None], seed, generator_id,
                        {"process": "ou", "alpha": params.alpha, "sigma": params.sigma})


def brownian_increments(grid, M, variances, seed, generator_id="bm"):
    """Increments of shape ``(M, n, len(variances))`` with component variances
    ``variances[k] * h``; their sum is the trace of the covariance."""
    variances = np.asarray(variances, dtype=float)
    if variances.ndim != 1 or np.any(variances < 0) or not np.all(np.isfinite(variances)):
        raise ValueError("component variances must be finite and nonnegative")
    z = rng.normals(seed, generator_id, M, (grid.n, variances.size))
    return z * np.sqrt(variances * grid.h)


def translate(ensemble, shift, window):
    """View of ``X(t + .)`` on the index window ``[start, stop)`` shifted by
    ``shift`` grid steps; shape ``(M, stop - start, d)``."""
    start, stop = window
    lo, hi = start + shift, stop + shift
    if stop < start or lo < 0 or hi > ensemble.grid.n + 1:
        raise IndexError(f"window [{lo}, {hi}) outside the grid of {ensemble.grid.n + 1} points")
    return ensemble.paths[:, lo:hi, :]


def sum_process(a, b):
    """Pathwise sum on a common probability space (path ``m`` with path ``m``)."""
    if a.grid != b.grid or a.paths.shape != b.paths.shape:
        raise ValueError("ensembles must share grid, dimension and path count")
    return PathEnsemble(a.grid, a.paths + b.paths, a.seed, f"sum({a.generator_id},{b.generator_id})",
                        {"terms": [a.params, b.params]})


def broadcast_at(ensemble, t):
    """Constant-in-time ensemble ``Y(s) = X(t)`` on the same grid."""
    values = ensemble.at(t)
    paths = np.broadcast_to(values[:, None, :], ensemble.paths.shape).copy()
    return PathEnsemble(ensemble.grid, paths, ensemble.seed, f"frozen({ensemble.generator_id}@{t})",
                        {"frozen_at": t, "source": ensemble.params})
