"""Quadrature rules and exact weighted moments on intervals.

The weight ``y**alpha`` is singular (alpha < 0) or degenerate (alpha > 0) at
``y = 0``; every integral of the weight against a polynomial is evaluated in
closed form through :func:`shifted_moments` instead of numerical quadrature.
"""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def weighted_interval_integral(alpha, m, y0, y1):
    """Return ``int_{y0}^{y1} y**(alpha + m) dy`` in closed form.

    Parameters
    ----------
    alpha : float
        Weight exponent, must satisfy ``alpha > -1``.
    m : int
        Nonnegative polynomial degree.
    y0, y1 : float or array_like
        Interval endpoints, ``0 <= y0 < y1``.
    """
    if alpha <= -1.0:
        raise ValueError(f"weight y^{alpha} is not integrable at 0 (need alpha > -1)")
    if m < 0:
        raise ValueError("m must be nonnegative")
    p = alpha + m + 1.0
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    out = _power_difference(p, y0, y1) / p
    return float(out) if out.ndim == 0 else out


def _power_difference(p, y0, y1):
    # y1**p - y0**p without cancellation when y0 ~ y1
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    safe = np.where(y0 > 0, y0, 1.0)
    ratio = np.where(y0 > 0, (y1 - y0) / safe, 0.0)
    close = np.where(y0 > 0, safe**p * np.expm1(p * np.log1p(ratio)), 0.0)
    return np.where(y0 > 0, close, y1**p)


def shifted_moments(alpha, y0, y1, jmax):
    """Moments ``int_{y0}^{y1} y**alpha t**j dy`` with ``t = (y - y0)/(y1 - y0)``.

    Works on arrays of intervals and returns an array of shape
    ``(n_intervals, jmax + 1)``. Uses the recursion
    ``(alpha + 1 + j) nu_j = y1**(alpha+1) - j (y0/h) nu_{j-1}``, run forward
    where ``y0/h`` is small and backward (Miller style) otherwise, so the
    result keeps full relative accuracy on strongly graded partitions.
    """
    if alpha <= -1.0:
        raise ValueError("alpha must exceed -1")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    h = y1 - y0
    if np.any(h <= 0):
        raise ValueError("intervals must have positive length")
    p = alpha + 1.0
    r = y0 / h
    top = y1**p
    out = np.empty((y0.size, jmax + 1))

    fwd = r <= 2.0
    if np.any(fwd):
        nu = _power_difference(p, y0[fwd], y1[fwd]) / p
        out[fwd, 0] = nu
        rf, tf = r[fwd], top[fwd]
        for j in range(1, jmax + 1):
            nu = (tf - j * rf * nu) / (p + j)
            out[fwd, j] = nu
    bwd = ~fwd
    if np.any(bwd):
        rb, tb = r[bwd], top[bwd]
        jstart = jmax + 60
        nu = y1[bwd] ** alpha * h[bwd] / (jstart + 1.0)
        for j in range(jstart, 0, -1):
            if j <= jmax:
                out[bwd, j] = nu
            nu = (tb - (p + j) * nu) / (j * rb)
        out[bwd, 0] = nu
    return out


def interval_rule(degree):
    """Gauss-Legendre points/weights on [0, 1] exact to ``degree``."""
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Conical-product rule on the reference triangle exact to ``degree``.

    Returns barycentric coordinates ``(n, 3)`` and weights summing to 1, so
    that ``sum(w * f) * area`` approximates the integral over a triangle.
    All weights are positive.
    """
    n = (degree + 2) // 2
    # Gauss-Jacobi in the collapsed direction absorbs the Duffy Jacobian
    a, wa = roots_jacobi(n, 1.0, 0.0)
    b, wb = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (a + 1.0)
    wu = wa / 4.0
    v = 0.5 * (b + 1.0)
    wv = 0.5 * wb
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = 2.0 * W.ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w
