"""Semilinear SDEs with a diagonal decaying generator.

``dX = -diag(delta) X dt + f(t, X) dt + g(t, X) dW`` with ``W`` a Wiener
process whose independent components have variances ``q_k`` (so that
``Tr Q = sum q_k``).  Mild solutions are simulated with the exponential
Euler scheme started at 0 a burn-in before the requested window.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .functions import as_expr
from .measures import ergodic_mean_sampled
from .processes import PathEnsemble, TimeGrid, brownian_increments

BLOWUP = 1e6


class SimulationBlowUp(RuntimeError):
    pass


def _eval_vector(exprs, t, x):
    return np.stack([np.broadcast_to(e(t, x), x.shape[:1]) for e in exprs], axis=-1)


@dataclass
class SdeModel:
    """``f`` and ``g`` are expressions (``d`` drift entries, ``d x d_noise``
    diffusion entries, text or trees) or callables ``(t, x) -> (M, d)`` /
    ``(M, d, d_noise)`` with ``x`` of shape ``(M, d)``."""

    deltas: tuple
    f: object
    g: object
    noise_variances: tuple
    K_growth: float | None = None
    K_lip: float | None = None

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in np.atleast_1d(self.deltas))
        self.noise_variances = tuple(float(q) for q in np.atleast_1d(self.noise_variances))
        if not all(d > 0 for d in self.deltas):
            raise ValueError("generator decays must be positive")
        if any(q < 0 or not math.isfinite(q) for q in self.noise_variances):
            raise ValueError("noise variances must be finite and nonnegative")
        d, dn = self.dim, self.dim_noise
        if not callable(self.f):
            self.f = [as_expr(e) for e in np.atleast_1d(np.asarray(self.f, dtype=object))]
            if len(self.f) != d:
                raise ValueError(f"drift needs {d} entries")
        if not callable(self.g):
            rows = np.asarray(self.g, dtype=object).reshape(d, dn)
            self.g = [[as_expr(e) for e in row] for row in rows]
        if self.K_growth is None or self.K_lip is None:
            lip, growth = self.certified_constants()
            self.K_lip = lip if self.K_lip is None else float(self.K_lip)
            self.K_growth = growth if self.K_growth is None else float(self.K_growth)

    @property
    def dim(self):
        return len(self.deltas)

    @property
    def dim_noise(self):
        return len(self.noise_variances)

    @property
    def delta(self):
        return min(self.deltas)

    @property
    def trace_q(self):
        return float(sum(self.noise_variances))

    @property
    def K(self):
        return max(self.K_growth, self.K_lip)

    def drift(self, t, x):
        if callable(self.f):
            return np.asarray(self.f(t, x), dtype=float).reshape(x.shape)
        return _eval_vector(self.f, t, x)

    def diffusion(self, t, x):
        if callable(self.g):
            return np.asarray(self.g(t, x), dtype=float).reshape(x.shape[0], self.dim, self.dim_noise)
        return np.stack([_eval_vector(row, t, x) for row in self.g], axis=1)

    def certified_constants(self):
        """Bounds read off the expression trees (``inf`` for callables).

        Lipschitz: Euclidean norm of the drift entry bounds plus the
        Frobenius norm of the diffusion entry bounds.  Growth: the same
        combination of sup bounds when all coefficients are bounded, else
        ``inf`` (declare it instead)."""
        if callable(self.f) or callable(self.g):
            return math.inf, math.inf
        lf = math.hypot(*[e.lipschitz_x() for e in self.f])
        lg = math.sqrt(sum(e.lipschitz_x() ** 2 for row in self.g for e in row))
        sf = math.hypot(*[e.sup_bound() for e in self.f])
        sg = math.sqrt(sum(e.sup_bound() ** 2 for row in self.g for e in row))
        return lf + lg, sf + sg

    def to_dict(self):
        return {
            "deltas": list(self.deltas),
            "noise_variances": list(self.noise_variances),
            "f": "<callable>" if callable(self.f) else [str(e) for e in self.f],
            "g": "<callable>" if callable(self.g) else [[str(e) for e in row] for row in self.g],
            "K_growth": self.K_growth,
            "K_lip": self.K_lip,
        }


def spot_check_constants(model, samples=2000, seed=0, t_range=(-100.0, 100.0), x_scale=3.0, tol=1e-9):
    """Largest observed growth and Lipschitz quotients on random samples,
    compared with the declared constants (operator norm for ``g``)."""
    gen = rng.path_generator(seed, "spot-check", 0)
    t = gen.uniform(*t_range, size=samples)
    x = x_scale * gen.standard_normal((samples, model.dim))
    y = x + gen.standard_normal((samples, model.dim)) * gen.uniform(1e-3, 2.0, size=(samples, 1))
    growth, lip = 0.0, 0.0
    for i in range(samples):
        xi, yi = x[i:i + 1], y[i:i + 1]
        fx, fy = model.drift(t[i], xi)[0], model.drift(t[i], yi)[0]
        gx, gy = model.diffusion(t[i], xi)[0], model.diffusion(t[i], yi)[0]
        size = np.linalg.norm(fx) + np.linalg.norm(gx, 2)
        growth = max(growth, size / (1.0 + np.linalg.norm(xi)))
        step = np.linalg.norm(fx - fy) + np.linalg.norm(gx - gy, 2)
        lip = max(lip, step / np.linalg.norm(xi - yi))
    ok = growth <= model.K_growth + tol and lip <= model.K_lip + tol
    return {"growth_quotient": float(growth), "lipschitz_quotient": float(lip),
            "K_growth": model.K_growth, "K_lip": model.K_lip, "pass": bool(ok)}


@dataclass
class CoefficientSplit:
    """``f = f1 + f2``, ``g = g1 + g2`` with ``f1, g1`` the almost automorphic
    part and ``f2, g2`` the ergodic part (expression lists as in SdeModel)."""

    f1: list
    f2: list
    g1: list
    g2: list
    tags: tuple = ("aa-part", "ergodic-part")

    def __post_init__(self):
        self.f1 = [as_expr(e) for e in self.f1]
        self.f2 = [as_expr(e) for e in self.f2]
        self.g1 = [[as_expr(e) for e in row] for row in self.g1]
        self.g2 = [[as_expr(e) for e in row] for row in self.g2]

    @property
    def f(self):
        return [a + b for a, b in zip(self.f1, self.f2)]

    @property
    def g(self):
        return [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.g1, self.g2)]

    def check_identity(self, model, samples=500, seed=0, tol=1e-12):
        """Sampled check that ``model``'s coefficients equal the split sums."""
        gen = rng.path_generator(seed, "split-check", 0)
        t = gen.uniform(-100.0, 100.0, size=samples)
        x = 3.0 * gen.standard_normal((samples, model.dim))
        worst = 0.0
        for i in range(samples):
            xi = x[i:i + 1]
            f_sum = _eval_vector(self.f1, t[i], xi) + _eval_vector(self.f2, t[i], xi)
            g_sum = (np.stack([_eval_vector(r, t[i], xi) for r in self.g1], axis=1)
                     + np.stack([_eval_vector(r, t[i], xi) for r in self.g2], axis=1))
            worst = max(worst, float(np.abs(model.drift(t[i], xi) - f_sum).max()),
                        float(np.abs(model.diffusion(t[i], xi) - g_sum).max()))
        return {"max_deviation": worst, "pass": worst <= tol}


def theta(model):
    K, d = model.K, model.delta
    return K**2 / d * (1.0 / (2.0 * d) + model.trace_q)


def theta_prime(model):
    K, d = model.K, model.delta
    return 4.0 * K**2 / d * (1.0 / d + model.trace_q)


def theta_values(K, delta, trace_q):
    """``(theta, theta')`` from raw constants."""
    return (K**2 / delta * (1.0 / (2.0 * delta) + trace_q),
            4.0 * K**2 / delta * (1.0 / delta + trace_q))


def validity(model):
    th, thp = theta(model), theta_prime(model)
    return {"theta": th, "theta_prime": thp, "theta_ok": th < 1.0, "theta_prime_ok": thp < 1.0}


def propagator(model, h):
    """Diagonal of ``exp(-diag(delta) h)``; its max is exactly ``exp(-delta h)``."""
    return np.exp(-np.asarray(model.deltas) * h)


def extended_grid(grid, burn_in):
    """Grid starting ``burn_in`` (rounded up to whole steps) before ``grid``."""
    n_burn = int(math.ceil(burn_in / grid.h - 1e-9))
    return TimeGrid(grid.t0 - n_burn * grid.h, grid.h, grid.n + n_burn), n_burn


def noise_block(model, grid, M, seed, generator_id="sde-noise"):
    return brownian_increments(grid, M, model.noise_variances, seed, generator_id)


def _step(model, E, c, t, x_in, y, dw):
    out = E * y + c * model.drift(t, x_in)
    g = model.diffusion(t, x_in)
    return out + E * np.einsum("mij,mj->mi", g, dw)


def _check_blowup(y, t):
    big = np.abs(y) > BLOWUP
    if np.any(big):
        m = int(np.argwhere(big)[0][0])
        raise SimulationBlowUp(f"|x| exceeded {BLOWUP:g} at t={t:.6g} on path {m}")


def _mild_recursion(model, grid, x_in, increments):
    deltas = np.asarray(model.deltas)
    E = np.exp(-deltas * grid.h)
    c = -np.expm1(-deltas * grid.h) / deltas
    M = increments.shape[0]
    out = np.zeros((M, grid.n + 1, model.dim))
    times = grid.times
    y = out[:, 0]
    for j in range(grid.n):
        src = y if x_in is None else x_in[:, j]
        y = _step(model, E, c, times[j], src, y, increments[:, j])
        _check_blowup(y, times[j + 1])
        out[:, j + 1] = y
    return out


def simulate_mild(model, grid, burn_in, M, seed, generator_id="sde-noise", increments=None):
    """Exponential-Euler mild solution on ``grid`` after a burn-in from 0.

    ``params['bias_bound']`` is ``K(1 + sup|x|) exp(-delta burn_in) / delta``.
    """
    if burn_in < 10.0 / model.delta - 1e-12:
        raise ValueError(f"burn-in must be at least 10/delta = {10.0 / model.delta:g}")
    if theta_prime(model) >= 1.0:
        warnings.warn(f"theta' = {theta_prime(model):.3g} >= 1", RuntimeWarning, stacklevel=2)
    full, n_burn = extended_grid(grid, burn_in)
    if increments is None:
        increments = noise_block(model, full, M, seed, generator_id)
    paths = _mild_recursion(model, full, None, increments)
    window = paths[:, n_burn:]
    sup = float(np.max(np.linalg.norm(paths, axis=-1)))
    actual_burn = n_burn * grid.h
    bias = model.K * (1.0 + sup) * math.exp(-model.delta * actual_burn) / model.delta
    params = {"process": "mild", "model": model.to_dict(), "burn_in": actual_burn, "bias_bound": bias}
    return PathEnsemble(grid, np.ascontiguousarray(window), seed, generator_id, params)


def picard_step(model, current, increments):
    """One application of the discretised mild operator to ``current``.

    Drift and diffusion are evaluated on the input path; the convolutions
    start from 0 at the first grid point.  Its fixed point is the output of
    ``simulate_mild`` on the same grid and noise block.
    """
    if increments.shape[:2] != (current.M, current.grid.n):
        raise ValueError("increments do not match the ensemble grid")
    if current.dim != model.dim or increments.shape[2] != model.dim_noise:
        raise ValueError("dimension mismatch between model, path and noise")
    paths = _mild_recursion(model, current.grid, current.paths, increments)
    return PathEnsemble(current.grid, paths, current.seed, current.generator_id,
                        {"process": "picard", "model": model.to_dict()})


@dataclass
class ContractionReport:
    ratios: list
    residuals: list
    theta: float
    converged: bool
    bound: float
    slack: float

    @property
    def tail_max(self):
        tail = self.ratios[len(self.ratios) // 2:] if self.ratios else []
        return max(tail) if tail else 0.0

    @property
    def passed(self):
        return self.tail_max <= self.bound * (1.0 + self.slack)

    def to_dict(self):
        return {"ratios": self.ratios, "residuals": self.residuals, "theta": self.theta,
                "converged": self.converged, "bound": self.bound, "slack": self.slack,
                "tail_max": self.tail_max, "pass": self.passed}


def contraction_rate(model, grid, M, seed, iterations, bound=None, slack=0.2, floor=1e-26):
    """Ratios of successive sup-grid mean-square Picard increments from ``X_0 = 0``.

    ``grid`` includes the burn-in.  ``bound`` defaults to theta.
    """
    th = theta(model)
    if th >= 1.0:
        raise ValueError(f"theta = {th:.3g} >= 1: no contraction to measure")
    increments = noise_block(model, grid, M, seed)
    x = PathEnsemble(grid, np.zeros((M, grid.n + 1, model.dim)), seed, "picard")
    residuals, ratios = [], []
    converged = False
    for _ in range(iterations):
        nxt = picard_step(model, x, increments)
        res = float(np.max(np.mean(np.sum((nxt.paths - x.paths) ** 2, axis=-1), axis=0)))
        residuals.append(res)
        x = nxt
        if res <= floor:
            converged = True
            break
        if len(residuals) > 1:
            ratios.append(res / residuals[-2])
    return ContractionReport(ratios, residuals, th, converged, th if bound is None else bound, slack)


def _exp_conv_weights(a, h):
    E = math.exp(-a * h)
    w1 = (1.0 - E) / a - (1.0 - E - a * h * E) / (a * a * h)
    w0 = (1.0 - E) / a - w1
    return E, w0, w1


def exp_convolution(values, a, h):
    """``int_{t_0}^{t_j} e^{-a(t_j - s)} v(s) ds`` for the piecewise-linear
    interpolant of grid samples, exact per step."""
    E, w0, w1 = _exp_conv_weights(a, h)
    out = np.zeros_like(values, dtype=float)
    for j in range(values.size - 1):
        out[j + 1] = E * out[j] + w0 * values[j] + w1 * values[j + 1]
    return out


def _sample(fn, times):
    return np.broadcast_to(np.asarray(as_expr(fn)(times) if not callable(fn) else fn(times), dtype=float),
                           times.shape).astype(float)


@dataclass
class GronwallReport:
    verdict: str
    hypothesis_holds: bool
    conclusion_holds: bool | None
    constant_bound_holds: bool | None
    max_hypothesis_excess: float
    max_conclusion_excess: float | None
    constant_bound: float | None
    truncation_bias: float
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def gronwall_bound_check(alpha_fn, betas, deltas, gamma, g_fn, window, h=0.01, burn_in=None,
                         assume_hypothesis=False, tol=1e-9):
    """Check the Gronwall-type bound on a window grid.

    The hypothesis ``0 <= g <= alpha + sum beta_i int e^{-delta_i(t-s)} g ds``
    is evaluated first; if it fails the verdict is ``"hypothesis fails"`` and
    the conclusion is only tested when ``assume_hypothesis`` is set.  The
    conclusion is ``g <= alpha + beta int e^{-gamma(t-s)} alpha ds`` and, for
    constant ``alpha``, ``g <= alpha delta / (delta - beta)``.  Integrals start
    ``burn_in`` before the window; the neglected tails are bounded and
    added to the tolerance.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    beta = float(betas.sum())
    delta = float(deltas.min())
    if np.any(betas < 0) or betas.shape != deltas.shape:
        raise ValueError("need matching nonnegative betas and decay rates")
    if not np.all(deltas > beta):
        raise ValueError("every decay rate must exceed the sum of the betas")
    if not 0.0 < gamma <= delta - beta + 1e-15:
        raise ValueError("gamma must lie in (0, delta - beta]")
    if burn_in is None:
        burn_in = 40.0 / gamma
    a, b = window
    n_burn = int(math.ceil(burn_in / h))
    n = int(round((b - a) / h))
    times = a - n_burn * h + h * np.arange(n_burn + n + 1)
    g = _sample(g_fn, times)
    alpha = _sample(alpha_fn, times)
    win = slice(n_burn, None)
    g_sup = float(np.max(np.abs(g)))
    alpha_sup = float(np.max(np.abs(alpha)))
    span = n_burn * h
    hyp_bias = sum(bi * g_sup * math.exp(-di * span) / di for bi, di in zip(betas, deltas))
    rhs = alpha + sum(bi * exp_convolution(g, di, h) for bi, di in zip(betas, deltas))
    excess_h = float(np.max(np.maximum(g - rhs - hyp_bias, -g)[win]))
    hyp = excess_h <= tol
    conc_bias = beta * alpha_sup * math.exp(-gamma * span) / gamma
    params = {"betas": betas.tolist(), "deltas": deltas.tolist(), "gamma": gamma, "window": [a, b],
              "h": h, "burn_in": span}
    constant = bool(np.all(alpha == alpha[0]))
    if not hyp and not assume_hypothesis:
        return GronwallReport("hypothesis fails", False, None, None, excess_h, None,
                              None, max(hyp_bias, conc_bias), params)
    bound = alpha + beta * exp_convolution(alpha, gamma, h)
    excess_c = float(np.max((g - bound)[win])) - conc_bias
    conc = excess_c <= tol
    cbound, cok = None, None
    if constant:
        cbound = float(alpha[0]) * delta / (delta - beta)
        cok = bool(np.max(g[win]) <= cbound + tol)
    ok = conc and (cok is None or cok)
    if hyp:
        verdict = "pass" if ok else "conclusion fails"
    else:
        verdict = "hypothesis fails"
    return GronwallReport(verdict, hyp, conc, cok, excess_h, excess_c, cbound,
                          max(hyp_bias, conc_bias), params)


@dataclass
class ConvolutionErgodicity:
    curve: object
    times: np.ndarray
    F: np.ndarray
    m_sup: float
    truncation_bias: float

    def to_dict(self):
        return {"radii": self.curve.radii.tolist(), "values": self.curve.values.tolist(),
                "m_sup": self.m_sup, "truncation_bias": self.truncation_bias}


def convolution_ergodicity_check(m_fn, delta, mu, radii, h=0.01, burn_in=None):
    """``F(t) = (int_{-inf}^t e^{-2 delta (t-s)} m(s)^2 ds)^{1/2}`` on a grid
    and its ergodic mean curve under ``mu``.  ``truncation_bias`` bounds the
    neglected left tail of ``F^2``."""
    radii = np.asarray(radii, dtype=float)
    R = float(radii.max())
    if burn_in is None:
        burn_in = 20.0 / delta
    n_burn = int(math.ceil(burn_in / h))
    n = int(math.ceil(2 * R / h))
    times = -R - n_burn * h + h * np.arange(n_burn + n + 1)
    m = _sample(m_fn, times)
    if np.any(m < 0):
        raise ValueError("m must be nonnegative")
    m_sup = float(m.max())
    F = np.sqrt(np.maximum(exp_convolution(m * m, 2.0 * delta, h), 0.0))
    bias = m_sup**2 * math.exp(-2.0 * delta * n_burn * h) / (2.0 * delta)
    tt, FF = times[n_burn:], F[n_burn:]
    curve = ergodic_mean_sampled(tt, FF, mu, radii)
    return ConvolutionErgodicity(curve, tt, FF, m_sup, bias)
