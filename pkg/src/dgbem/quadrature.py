"""Quadrature rules on the unit interval and the reference triangle."""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Gauss-Legendre rule with ``n`` points on [0, 1]; exact for degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi01(n, alpha, beta):
    """Gauss-Jacobi rule on [0, 1] for the weight (1-t)**alpha * t**beta."""
    x, w = roots_jacobi(n, alpha, beta)
    scale = 0.5 ** (alpha + beta + 1.0)
    return 0.5 * (x + 1.0), w * scale


def edge_points(k):
    """Number of Gauss points used on edges for degree-k DG forms."""
    return int(np.ceil((2 * k + 1) / 2)) + 1


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Collapsed (Stroud conical) rule on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``order``. Returns points of shape
    (n, 2) and weights summing to 1/2.
    """
    n = order // 2 + 1
    a, wa = gauss_legendre(n)
    b, wb = gauss_jacobi01(n, 1.0, 0.0)
    # x = a (1 - b), y = b; the (1 - b) Jacobian is absorbed by the Jacobi weight
    aa, bb = np.meshgrid(a, b, indexing="ij")
    pts = np.column_stack([(aa * (1.0 - bb)).ravel(), bb.ravel()])
    wts = np.outer(wa, wb).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def graded_rule(n_levels=36, ratio=0.5, n_points=10, both_ends=True):
    """Composite Gauss rule on [0, 1] geometrically graded toward the endpoints.

    Integrates functions with ``t log t``-type endpoint behaviour to near machine
    precision.
    """
    g, gw = gauss_legendre(n_points)
    # breakpoints 0 < r^L < ... < r < 1 mapped to [0, 1/2] if two-sided
    bps = np.concatenate([[0.0], ratio ** np.arange(n_levels, 0, -1), [1.0]])
    pts, wts = [], []
    for lo, hi in zip(bps[:-1], bps[1:]):
        pts.append(lo + (hi - lo) * g)
        wts.append((hi - lo) * gw)
    x = np.concatenate(pts)
    w = np.concatenate(wts)
    if not both_ends:
        return x, w
    x = 0.5 * x
    w = 0.5 * w
    return np.concatenate([x, 1.0 - x[::-1]]), np.concatenate([w, w[::-1]])


def composite_graded(breaks, **kw):
    """Graded rule on [0, 1] refined toward every breakpoint in ``breaks``."""
    cuts = np.unique(np.clip(np.concatenate([[0.0, 1.0], np.asarray(breaks, float)]), 0.0, 1.0))
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 1e-14])]
    x0, w0 = graded_rule(**kw)
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        xs.append(lo + (hi - lo) * x0)
        ws.append((hi - lo) * w0)
    return np.concatenate(xs), np.concatenate(ws)
