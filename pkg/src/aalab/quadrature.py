"""Vectorised composite adaptive Gauss-Legendre quadrature.

Each piece is integrated with a 10- and a 20-point rule; pieces whose two
estimates disagree by more than ``atol * length`` (or ``rtol`` relative) are
bisected.  All pieces of one refinement level are evaluated in a single call
of the integrand, so the integrand must accept ndarrays.
"""

import warnings

import numpy as np

ATOL = 1e-9
RTOL = 1e-12

_X10, _W10 = np.polynomial.legendre.leggauss(10)
_X20, _W20 = np.polynomial.legendre.leggauss(20)
_MAX_LEVELS = 40
_MAX_ACTIVE = 2_000_000


def integrate_pieces(fn, edges, atol=ATOL, rtol=RTOL):
    """Integral of ``fn`` over each consecutive ``[edges[i], edges[i+1]]``.

    Returns ``(integrals, converged)``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two edges")
    if np.any(np.diff(edges) < 0):
        raise ValueError("edges must be nondecreasing")
    out = np.zeros(edges.size - 1)
    a, b = edges[:-1].copy(), edges[1:].copy()
    owner = np.arange(a.size)
    keep = b > a
    a, b, owner = a[keep], b[keep], owner[keep]
    converged = True
    for level in range(_MAX_LEVELS + 1):
        if a.size == 0:
            break
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        lo = half * (fn(mid[:, None] + half[:, None] * _X10) @ _W10)
        hi = half * (fn(mid[:, None] + half[:, None] * _X20) @ _W20)
        if not np.all(np.isfinite(hi)):
            raise FloatingPointError("integrand returned non-finite values")
        err = np.abs(hi - lo)
        done = (err <= np.maximum(atol * (b - a), rtol * np.abs(hi))) | (level == _MAX_LEVELS)
        if level == _MAX_LEVELS and not np.all(err <= atol * (b - a)):
            converged = False
        np.add.at(out, owner[done], hi[done])
        a, b, owner, mid = a[~done], b[~done], owner[~done], mid[~done]
        if a.size * 2 > _MAX_ACTIVE:
            # give up refining: accept the current estimates
            lo_hi = 0.5 * (b - a)
            est = lo_hi * (fn(mid[:, None] + lo_hi[:, None] * _X20) @ _W20)
            np.add.at(out, owner, est)
            converged = False
            break
        a, b, owner = np.concatenate([a, mid]), np.concatenate([mid, b]), np.concatenate([owner, owner])
    if not converged:
        warnings.warn("adaptive quadrature hit its refinement limit", RuntimeWarning, stacklevel=2)
    return out, converged


def unit_edges(lo, hi, extra=()):
    """Integer points of ``[lo, hi]`` merged with ``lo``, ``hi`` and ``extra``."""
    ints = np.arange(np.ceil(lo), np.floor(hi) + 1.0)
    pts = np.concatenate([[lo, hi], ints, np.asarray(extra, dtype=float)])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def integrate(fn, a, b, atol=ATOL, rtol=RTOL):
    """Integral of ``fn`` over ``[a, b]`` split into unit pieces."""
    if b < a:
        return -integrate(fn, b, a, atol, rtol)
    if a == b:
        return 0.0
    vals, _ = integrate_pieces(fn, unit_edges(a, b), atol, rtol)
    return float(vals.sum())
