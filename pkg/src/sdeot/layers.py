"""Cell-aligned quadrature graded toward cell interfaces.

Entropic weights change over a band of width ~eps around the faces of the
Laguerre diagram, and the Brenier map jumps across them. Integrals of such
quantities are computed piecewise over the cells (optionally intersected with
the cells of a second diagram) with panels that shrink geometrically toward
every interface, so no panel straddles a jump and the band is resolved at
every eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DOMAIN, LaguerreDiagram, _half_planes, clip_polygon
from .quadrature import composite_gl, graded_breaks, polygon_area, triangle_rule

ORDER_1D = 16
ORDER_2D = 8


@dataclass(frozen=True)
class LayeredRule:
    """Nodes ``x`` (m, d), weights ``w`` (m,) that already include the density,
    and the owning cell of each node in the first (``owner``) and second
    (``owner2``, -1 if absent) diagram."""

    x: np.ndarray
    w: np.ndarray
    owner: np.ndarray
    owner2: np.ndarray


def layer_width(eps: float, *diagrams: LaguerreDiagram) -> float:
    """Distance over which softmax weights at temperature eps/2 change by O(1)."""
    spread = max(d.target.diameter for d in diagrams)
    return eps / (2.0 * spread) if spread > 0 else np.inf


def layered_rule(diag: LaguerreDiagram, other: LaguerreDiagram | None = None,
                 eps: float | None = None, kinks=()) -> LayeredRule:
    if diag.source.dim == 1:
        return _rule_1d(diag, other, kinks)
    ell = None if eps is None else layer_width(eps, diag, *([other] if other else []))
    return _rule_2d(diag, other, ell)


def _rule_1d(diag, other, kinks) -> LayeredRule:
    src = diag.source
    a, b = src.domain
    # grading is cheap in 1-D, so resolve every interface down to a tiny panel
    hmin = 1e-9 * (b - a)
    layer_pts = [f.points[0, 0] for f in other.facets.values()] if other else []
    kink_pts = list(src.density.breakpoints) + [float(k) for k in kinks]
    xs, ws, own, own2 = [], [], [], []
    for cell in diag.cells:
        if cell.empty:
            continue
        lo, hi = cell.vertices
        cuts = {lo: cell.labels[0] != DOMAIN, hi: cell.labels[1] != DOMAIN}
        for p in layer_pts + kink_pts:
            if lo < p < hi and min(p - lo, hi - p) > 1e-15 * (b - a):
                cuts[p] = True
        pts = sorted(cuts)
        for u, v in zip(pts[:-1], pts[1:]):
            rel = graded_breaks(hmin / (v - u), cuts[u], cuts[v], min_panels=4)
            x, w = composite_gl(u + (v - u) * rel, ORDER_1D)
            xs.append(x)
            ws.append(w)
            own.append(np.full(len(x), cell.index))
            mid = np.array([[0.5 * (u + v)]])
            own2.append(np.full(len(x), other.locate(mid)[0] if other else -1))
    x = np.concatenate(xs)[:, None]
    w = np.concatenate(ws) * src.density(x)
    return LayeredRule(x, w, np.concatenate(own), np.concatenate(own2))


def _pieces_2d(diag, other):
    tol = 1e-12 * max(1.0, float(np.max(np.abs(diag.source.domain))))
    for cell in diag.cells:
        if cell.empty:
            continue
        if other is None:
            yield cell.index, -1, cell.vertices, cell.labels
            continue
        for oc in other.cells:
            if oc.empty:
                continue
            verts, labels = cell.vertices, list(cell.labels)
            for j, a, b in _half_planes(other.target, other.z, oc.index):
                verts, labels = clip_polygon(verts, labels, a, b, j, tol * (1 + np.linalg.norm(a)))
                if len(verts) == 0:
                    break
            if len(verts) and polygon_area(verts) > 1e-15:
                yield cell.index, oc.index, verts, labels


def _rule_2d(diag, other, ell) -> LayeredRule:
    xs, ws, own, own2 = [], [], [], []
    for i, k, verts, labels in _pieces_2d(diag, other):
        layer = [lab != DOMAIN for lab in labels]
        c = verts.mean(axis=0)
        m = len(verts)
        for e in range(m):
            v1, v2 = verts[e], verts[(e + 1) % m]
            prev_l, cur_l, next_l = layer[e - 1], layer[e], layer[(e + 1) % m]
            edge = float(np.linalg.norm(v2 - v1))
            height = 2.0 * abs(polygon_area(np.array([c, v1, v2]))) / edge
            if ell is None:
                s_br = t_br = np.linspace(0.0, 1.0, 5)
            else:
                s_br = graded_breaks(0.25 * ell / height, False, cur_l or prev_l or next_l,
                                     min_panels=4)
                t_br = graded_breaks(0.25 * ell / edge, prev_l, next_l, min_panels=4)
            x, w = triangle_rule(c, v1, v2, s_br, t_br, ORDER_2D)
            xs.append(x)
            ws.append(w)
            own.append(np.full(len(x), i))
            own2.append(np.full(len(x), k))
    x = np.concatenate(xs)
    w = np.concatenate(ws) * diag.source.density(x)
    return LayeredRule(x, w, np.concatenate(own), np.concatenate(own2))
