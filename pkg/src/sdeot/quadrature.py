"""Quadrature rules on intervals, triangles and convex polygons.

All rules are built from Gauss-Legendre panels. Triangles use the collapsed
(Duffy) map from the unit square, which with ``n`` points per direction
integrates polynomials of total degree ``2n - 2`` exactly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``n``-point rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gl(breaks, n: int) -> tuple[np.ndarray, np.ndarray]:
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(n)
    h = np.diff(breaks)
    nodes = (breaks[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def _toward_zero(h: float, length: float, ratio: float) -> list[float]:
    pts = [0.0]
    p = h
    while p < length / ratio:
        pts.append(p)
        p *= ratio
    pts.append(length)
    return pts


def graded_breaks(h: float, left: bool, right: bool, ratio: float = 2.0,
                  min_panels: int = 1) -> np.ndarray:
    """Panel breaks on [0, 1] shrinking geometrically toward the refined ends.

    ``h`` is the width of the smallest panel, relative to the unit interval.
    """
    if not (left or right) or h >= 0.25:
        return np.linspace(0.0, 1.0, min_panels + 1)
    if left and right:
        half = np.array(_toward_zero(h, 0.5, ratio))
        return np.concatenate([half, 1.0 - half[-2::-1]])
    one = np.array(_toward_zero(h, 1.0, ratio))
    return one if left else (1.0 - one)[::-1]


def triangle_rule(apex, v1, v2, s_breaks, t_breaks, n: int):
    """Collapsed tensor rule on the triangle (apex, v1, v2).

    ``s`` runs from the apex (0) to the edge v1-v2 (1), ``t`` along that edge.
    Returns nodes of shape (m, 2) and weights of shape (m,).
    """
    apex = np.asarray(apex, dtype=float)
    a = np.asarray(v1, dtype=float) - apex
    b = np.asarray(v2, dtype=float) - np.asarray(v1, dtype=float)
    jac = abs(a[0] * b[1] - a[1] * b[0])
    s, ws = composite_gl(s_breaks, n)
    t, wt = composite_gl(t_breaks, n)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws * s, wt) * jac
    pts = apex + S.ravel()[:, None] * (a + T.ravel()[:, None] * b)
    return pts, W.ravel()


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_rule(vertices, n: int = 5, level: int = 4):
    """Centroid-fan rule on a convex polygon with ``level`` uniform panels per direction."""
    v = np.asarray(vertices, dtype=float)
    c = v.mean(axis=0)
    br = np.linspace(0.0, 1.0, level + 1)
    pts, wts = [], []
    for k in range(len(v)):
        p, w = triangle_rule(c, v[k], v[(k + 1) % len(v)], br, br, n)
        pts.append(p)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def segment_rule(p, q, n: int = 16, panels: int = 4):
    """Gauss-Legendre rule on the segment p-q with arc-length weights."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    t, w = composite_gl(np.linspace(0.0, 1.0, panels + 1), n)
    return p + t[:, None] * (q - p), w * float(np.linalg.norm(q - p))
