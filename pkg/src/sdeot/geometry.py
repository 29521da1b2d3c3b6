"""Laguerre diagrams of a potential vector on the source domain.

Cell ``i`` for potential ``z`` is the set of domain points where
``<x, y_i> - z_i`` is maximal. Cells are built by clipping the domain with
the half-spaces ``<y_i - y_j, x> >= z_i - z_j``; every boundary piece keeps
the index ``j`` of the constraint that produced it (-1 for the domain
boundary), which is how facets are recovered.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .measures import DiscreteMeasure, SourceMeasure, as_points
from .quadrature import composite_gl, polygon_area, polygon_rule, segment_rule

DOMAIN = -1
_VERTEX_TOL = 1e-12


class DegenerateCellWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PotentialVector:
    """Dual potential normalised to zero sum; ``eps`` is None for the unregularized one."""

    values: np.ndarray
    eps: float | None = None

    def __post_init__(self):
        z = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(z)):
            raise ValueError("potential values must be finite")
        if abs(z.sum()) > 1e-12 * max(1.0, float(np.abs(z).sum())):
            raise ValueError(f"potential must sum to zero, got {z.sum():.3e}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        z.setflags(write=False)
        object.__setattr__(self, "values", z)

    @classmethod
    def normalized(cls, values, eps: float | None = None) -> "PotentialVector":
        z = np.asarray(values, dtype=float).ravel()
        return cls(z - z.mean(), eps)

    @property
    def kind(self) -> str:
        return "unregularized" if self.eps is None else "entropic"

    def __len__(self):
        return len(self.values)


def voronoi_potential(target: DiscreteMeasure) -> PotentialVector:
    """Potential whose Laguerre cells are the Voronoi cells of the support."""
    return PotentialVector.normalized(0.5 * np.sum(target.points**2, axis=1))


def _values(z) -> np.ndarray:
    return z.values if isinstance(z, PotentialVector) else np.asarray(z, dtype=float).ravel()


@dataclass(frozen=True, eq=False)
class Cell:
    """Convex cell. 1-D: ``vertices = [lo, hi]`` and ``labels = (lo label, hi label)``.
    2-D: counterclockwise polygon, ``labels[k]`` belongs to edge ``v_k -> v_{k+1}``."""

    index: int
    vertices: np.ndarray
    labels: tuple[int, ...]
    empty: bool


@dataclass(frozen=True, eq=False)
class Facet:
    """Common face of cells ``i < j``: a point in 1-D, a segment in 2-D."""

    i: int
    j: int
    points: np.ndarray
    direction: np.ndarray

    @property
    def size(self) -> float:
        if len(self.points) == 1:
            return 1.0
        return float(np.linalg.norm(self.points[1] - self.points[0]))


# ---------------------------------------------------------------- clipping


def clip_interval(lo, hi, lab_lo, lab_hi, a, b, label):
    """Intersect [lo, hi] with ``{a x >= b}`` (a != 0)."""
    c = b / a
    if a > 0 and c > lo:
        lo, lab_lo = c, label
    elif a < 0 and c < hi:
        hi, lab_hi = c, label
    return lo, hi, lab_lo, lab_hi


def clip_polygon(verts: np.ndarray, labels: list[int], a, b, label: int, tol: float):
    """Sutherland-Hodgman clip of a convex polygon to ``{<a, x> >= b}``.

    Edge labels travel with the surviving pieces of each edge; the new edge
    along the clipping line gets ``label``.
    """
    f = verts @ a - b
    inside = f >= -tol
    if inside.all():
        return verts, labels
    if not inside.any():
        return verts[:0], []
    out_v, out_l = [], []
    m = len(verts)
    for k in range(m):
        k1 = (k + 1) % m
        p, q = verts[k], verts[k1]
        if inside[k]:
            out_v.append(p)
            out_l.append(labels[k])
            if not inside[k1]:
                t = f[k] / (f[k] - f[k1])
                out_v.append(p + t * (q - p))
                out_l.append(label)
        elif inside[k1]:
            t = f[k] / (f[k] - f[k1])
            out_v.append(p + t * (q - p))
            out_l.append(labels[k])
    return _dedupe(np.array(out_v), out_l, tol)


def _dedupe(verts, labels, tol):
    if len(verts) == 0:
        return verts, labels
    m = len(verts)
    # a zero-length edge k is dropped together with its start vertex
    keep = [k for k in range(m) if np.max(np.abs(verts[k] - verts[(k + 1) % m])) > tol]
    if len(keep) < 3:
        return verts[:0], []
    return verts[keep], [labels[k] for k in keep]


def _half_planes(target: DiscreteMeasure, z: np.ndarray, i: int):
    y = target.points
    for j in range(target.n):
        if j != i:
            yield j, y[i] - y[j], z[i] - z[j]


def _scale(source: SourceMeasure) -> float:
    return max(1.0, float(np.max(np.abs(source.vertices))))


def laguerre_cell(source: SourceMeasure, target: DiscreteMeasure, z, i: int,
                  start=None, start_labels=None):
    """Vertices and labels of cell ``i``; returns empty arrays if the cell is empty."""
    z = _values(z)
    tol = _VERTEX_TOL * _scale(source)
    if source.dim == 1:
        lo, hi = start if start is not None else source.domain
        llo, lhi = start_labels if start_labels is not None else (DOMAIN, DOMAIN)
        for j, a, b in _half_planes(target, z, i):
            lo, hi, llo, lhi = clip_interval(lo, hi, llo, lhi, a[0], b, j)
        return np.array([lo, hi]), (llo, lhi)
    verts = source.domain if start is None else start
    labels = [DOMAIN] * len(verts) if start_labels is None else list(start_labels)
    for j, a, b in _half_planes(target, z, i):
        verts, labels = clip_polygon(verts, labels, a, b, j, tol * (1 + np.linalg.norm(a)))
        if len(verts) == 0:
            break
    return verts, tuple(labels)


# ----------------------------------------------------------------- diagram


class LaguerreDiagram:
    """Cells and facets of potential ``z``; ``z`` may be any real vector."""

    def __init__(self, source: SourceMeasure, target: DiscreteMeasure, z):
        if source.dim != target.dim:
            raise ValueError(f"source is {source.dim}-D but target is {target.dim}-D")
        zv = _values(z)
        if len(zv) != target.n:
            raise ValueError(f"potential has length {len(zv)}, target has {target.n} atoms")
        self.source = source
        self.target = target
        self.potential = z if isinstance(z, PotentialVector) else None
        self.z = zv.copy()
        self.z.setflags(write=False)
        self.cells = [self._build_cell(i) for i in range(target.n)]
        self.facets = self._build_facets()

    def _build_cell(self, i: int) -> Cell:
        verts, labels = laguerre_cell(self.source, self.target, self.z, i)
        if self.source.dim == 1:
            width = verts[1] - verts[0]
            empty = width <= 0
            if 0 <= width < 1e-14:
                warnings.warn(f"cell {i} is degenerate (length {width:.1e}); marked empty",
                              DegenerateCellWarning, stacklevel=3)
            return Cell(i, verts, labels, bool(empty))
        if len(verts) == 0:
            return Cell(i, np.zeros((0, 2)), (), True)
        area = polygon_area(verts)
        if area < 1e-14:
            warnings.warn(f"cell {i} is degenerate (area {area:.1e}); marked empty",
                          DegenerateCellWarning, stacklevel=3)
            return Cell(i, verts, labels, True)
        return Cell(i, verts, labels, False)

    def _build_facets(self) -> dict[tuple[int, int], Facet]:
        y = self.target.points
        facets = {}

        def add(i, j, pts):
            i, j = min(i, j), max(i, j)
            if (i, j) not in facets:
                d = y[i] - y[j]
                facets[i, j] = Facet(i, j, np.asarray(pts, dtype=float), d / (d @ d))

        if self.source.dim == 1:
            live = sorted((c for c in self.cells if not c.empty), key=lambda c: c.vertices[0])
            for c, nxt in zip(live[:-1], live[1:]):
                add(c.index, nxt.index, [[c.vertices[1]]])
            return dict(sorted(facets.items()))
        tol = 1e-12 * _scale(self.source)
        for c in self.cells:
            if c.empty:
                continue
            v = c.vertices
            for k, lab in enumerate(c.labels):
                if lab == DOMAIN or self.cells[lab].empty:
                    continue
                p, q = v[k], v[(k + 1) % len(v)]
                if np.linalg.norm(q - p) > tol:
                    add(c.index, lab, [p, q])
        return dict(sorted(facets.items()))

    # -- queries -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def empty(self) -> np.ndarray:
        return np.array([c.empty for c in self.cells])

    def logits(self, x) -> np.ndarray:
        x = as_points(x, self.source.dim)
        return x @ self.target.points.T - self.z

    def locate(self, x) -> np.ndarray:
        """Index of the cell containing each point; ties go to the lowest index."""
        return np.argmax(self.logits(x), axis=1)

    def cell_rule(self, i: int):
        """Lebesgue quadrature nodes and weights on cell ``i``."""
        return cell_rule(self.source, self.cells[i])

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([cell_mass(self, i) for i in range(self.n)])

    def facet(self, i: int, j: int) -> Facet | None:
        return self.facets.get((min(i, j), max(i, j)))

    def to_dict(self) -> dict:
        """Plain-data dump: cell vertex lists, masses and the facet table."""
        return {
            "z": self.z.tolist(),
            "cells": [{"index": c.index, "empty": c.empty,
                       "vertices": np.asarray(c.vertices).tolist(),
                       "labels": list(c.labels), "mass": float(m)}
                      for c, m in zip(self.cells, self.masses)],
            "facets": [{"i": f.i, "j": f.j, "points": f.points.tolist(),
                        "integral": facet_integral(self, f.i, f.j)}
                       for f in self.facets.values()],
        }


def build_diagram(source: SourceMeasure, target: DiscreteMeasure, z) -> LaguerreDiagram:
    return LaguerreDiagram(source, target, z)


def cell_rule(source: SourceMeasure, cell: Cell):
    if cell.empty:
        return np.zeros((0, source.dim)), np.zeros(0)
    if source.dim == 1:
        lo, hi = cell.vertices
        cuts = sorted({lo, hi, *(p for p in source.density.breakpoints if lo < p < hi)})
        breaks = np.concatenate([np.linspace(u, v, 5)[:-1] for u, v in zip(cuts[:-1], cuts[1:])]
                                + [[hi]])
        x, w = composite_gl(breaks, source.quad.order_1d)
        return x[:, None], w
    return polygon_rule(cell.vertices, source.quad.order_2d, source.quad.level_2d)


def cell_mass(diag: LaguerreDiagram, i: int) -> float:
    """P-mass of cell ``i`` (0 for empty cells)."""
    x, w = diag.cell_rule(i)
    return float(w @ diag.source.density(x)) if len(w) else 0.0


def _weighted(diag, i, j, x, weight):
    rho = diag.source.density(x)
    if weight is None:
        return rho
    phi = np.asarray(weight(x), dtype=float).reshape(len(x), -1)
    return (phi @ (diag.target.points[j] - diag.target.points[i])) * rho


def _segment_integral(diag, i, j, p, q, weight) -> float:
    if diag.source.dim == 1:
        return float(_weighted(diag, i, j, np.atleast_2d(p), weight)[0])
    x, w = segment_rule(p, q, n=16, panels=4)
    return float(w @ _weighted(diag, i, j, x, weight))


def facet_integral(diag: LaguerreDiagram, i: int, j: int, weight=None) -> float:
    """Integral of the density over the common face of cells ``i`` and ``j``.

    With a vector field ``weight`` the integrand is ``<y_j - y_i, weight(x)> rho(x)``,
    which makes the weighted version antisymmetric in ``(i, j)``.
    """
    if i == j:
        raise ValueError("facet_integral needs distinct indices")
    f = diag.facet(i, j)
    if f is None:
        return 0.0
    if diag.source.dim == 1:
        return _segment_integral(diag, i, j, f.points[0], None, weight)
    return _segment_integral(diag, i, j, f.points[0], f.points[1], weight)


def level_set_integral(diag: LaguerreDiagram, i: int, j: int, t: float, weight=None) -> float:
    """Same integrand as :func:`facet_integral` over ``{x in C_i : Delta_ij(x) = t}``."""
    if i == j:
        raise ValueError("level_set_integral needs distinct indices")
    if t < 0:
        raise ValueError("t must be nonnegative")
    cell = diag.cells[i]
    if cell.empty:
        return 0.0
    y = diag.target.points
    a = y[i] - y[j]
    b = diag.z[i] - diag.z[j] + t
    tol = 1e-12 * _scale(diag.source)
    if diag.source.dim == 1:
        x = b / a[0]
        lo, hi = cell.vertices
        if lo - tol <= x <= hi + tol:
            return _segment_integral(diag, i, j, [x], None, weight)
        return 0.0
    seg = _line_polygon(cell.vertices, a, b, tol * (1 + np.linalg.norm(a)))
    if seg is None:
        return 0.0
    return _segment_integral(diag, i, j, seg[0], seg[1], weight)


def _line_polygon(verts, a, b, tol):
    """Segment where the line ``<a, x> = b`` meets a convex polygon, or None."""
    f = verts @ a - b
    pts = [verts[k] for k in range(len(verts)) if abs(f[k]) <= tol]
    m = len(verts)
    for k in range(m):
        k1 = (k + 1) % m
        if (f[k] > tol and f[k1] < -tol) or (f[k] < -tol and f[k1] > tol):
            t = f[k] / (f[k] - f[k1])
            pts.append(verts[k] + t * (verts[k1] - verts[k]))
    if len(pts) < 2:
        return None
    pts = np.array(pts)
    d = np.array([-a[1], a[0]])
    s = pts @ d
    return pts[np.argmin(s)], pts[np.argmax(s)]


def mass_jacobian(diag: LaguerreDiagram) -> np.ndarray:
    """Derivative of cell masses with respect to ``z``.

    Off-diagonal entries are facet integrals over ``|y_i - y_j|``; rows sum to zero.
    """
    n = diag.n
    J = np.zeros((n, n))
    y = diag.target.points
    for (i, j) in diag.facets:
        J[i, j] = J[j, i] = facet_integral(diag, i, j) / np.linalg.norm(y[i] - y[j])
    J[np.diag_indices(n)] = -J.sum(axis=1)
    return J
