"""Hölder test fields and integrals of the map difference ``T_eps - T_0``.

The Hölder norm used throughout is ``sup|phi| + sup |phi(x) - phi(y)| / |x - y|^alpha``.
Fields with ``alpha == 0`` are only certified bounded (``holder_bound`` bounds
``sup|phi|``); they model discontinuous test functions.

All integrals run over the cells of the unregularized diagram, refined by
the cells of the entropic diagram, with panels graded toward every interface
(see :mod:`sdeot.layers`), so neither the jump of ``T_0`` nor the softmax
transition band is smeared by the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import LaguerreDiagram, PotentialVector, _values, build_diagram
from .layers import layered_rule
from .maps import entropic_offset
from .measures import SourceMeasure, domain_contains

_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class TestField:
    evaluator: Callable[[np.ndarray], np.ndarray]
    alpha: float
    holder_bound: float
    label: str
    kinks: tuple = ()
    spec: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.holder_bound > 0:
            raise ValueError("holder_bound must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        return np.asarray(self.evaluator(x), dtype=float).reshape(x.shape)

    def scaled(self, c: float, label: str | None = None) -> "TestField":
        f = self.evaluator
        return TestField(lambda x: c * f(x), self.alpha, abs(c) * self.holder_bound,
                         label or f"{c:g}*{self.label}", self.kinks,
                         {"scale": c, "base": self.spec})

    def normalized(self) -> "TestField":
        return self.scaled(1.0 / self.holder_bound, self.label)

    def certify(self, source: SourceMeasure, n_pairs: int = 10_000, seed: int = 0) -> bool:
        """Probabilistic certificate: sup and two-point ratio on random pairs stay within the bound."""
        rng = np.random.default_rng(seed)
        x = uniform_points(source, n_pairs, rng)
        y = uniform_points(source, n_pairs, rng)
        # pairs at close range probe the small-scale constant
        y[: n_pairs // 2] = _pull_toward(x[: n_pairs // 2], y[: n_pairs // 2], rng)
        fx, fy = self(x), self(y)
        slack = 1e-12 * (1 + self.holder_bound)
        sup = max(np.linalg.norm(fx, axis=1).max(), np.linalg.norm(fy, axis=1).max())
        if sup > self.holder_bound + slack:
            return False
        if self.alpha == 0:
            return True
        dist = np.linalg.norm(x - y, axis=1)
        ok = dist > 0
        ratio = np.linalg.norm(fx - fy, axis=1)[ok] / dist[ok] ** self.alpha
        return bool(sup + (ratio.max() if ratio.size else 0.0) <= self.holder_bound + slack)


def uniform_points(source: SourceMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = source.bounding_box
    out, got = [], 0
    while got < n:
        x = lo + (hi - lo) * rng.random((2 * n, source.dim))
        x = x[domain_contains(source.domain, x)]
        out.append(x)
        got += len(x)
    return np.concatenate(out)[:n]


def _pull_toward(x, y, rng):
    t = 10.0 ** rng.uniform(-6, 0, size=(len(x), 1))
    return x + t * (y - x)


# -- factories ----------------------------------------------------------------

def identity_field(source: SourceMeasure, alpha: float = 1.0) -> TestField:
    """``phi(x) = x``; norm bound ``max|x| + diam^(1 - alpha)``."""
    bound = source.max_norm + source.diameter ** (1 - alpha)
    return TestField(lambda x: x.copy(), alpha, bound, "id", spec={"kind": "identity"})


def constant_field(c) -> TestField:
    c = np.asarray(c, dtype=float).ravel()
    return TestField(lambda x: np.broadcast_to(c, x.shape).copy(), 1.0,
                     max(float(np.linalg.norm(c)), 1e-300), "const",
                     spec={"kind": "constant", "value": c.tolist()})


def coordinate_field(source: SourceMeasure, k: int, alpha: float = 1.0) -> TestField:
    """``phi(x) = x_k e_k``."""
    lo, hi = source.bounding_box
    bound = max(abs(lo[k]), abs(hi[k])) + source.diameter ** (1 - alpha)

    def f(x):
        out = np.zeros_like(x)
        out[:, k] = x[:, k]
        return out

    return TestField(f, alpha, bound, f"coord{k}", spec={"kind": "coordinate", "axis": k})


def radial_field(source: SourceMeasure, center, alpha: float, direction=None) -> TestField:
    """``(x - x0)|x - x0|^(alpha - 1)``, or its projection on ``direction``.

    The map ``u -> u|u|^(alpha-1)`` is alpha-Hölder with constant ``2^(1-alpha)``.
    """
    x0 = np.asarray(center, dtype=float).ravel()
    v = None if direction is None else np.asarray(direction, dtype=float).ravel()
    if v is not None:
        v = v / np.linalg.norm(v)

    def f(x):
        u = x - x0
        r = np.linalg.norm(u, axis=1, keepdims=True)
        scale = np.where(r > 0, r ** (alpha - 1) if alpha < 1 else 1.0, 0.0)
        out = u * scale
        return out if v is None else (out @ v)[:, None] * v

    bound = source.diameter ** alpha + 2.0 ** (1 - alpha)
    kinks = (float(x0[0]),) if source.dim == 1 else ()
    return TestField(f, alpha, bound, f"radial@{np.round(x0, 4).tolist()}", kinks,
                     {"kind": "radial", "center": x0.tolist(), "alpha": alpha,
                      "direction": None if v is None else v.tolist()})


def sign_field(source: SourceMeasure, threshold: float = 0.0, axis: int = 0) -> TestField:
    """Bounded, discontinuous ``e_axis * sign(x_axis - threshold)``."""

    def f(x):
        out = np.zeros_like(x)
        out[:, axis] = np.sign(x[:, axis] - threshold)
        return out

    kinks = (float(threshold),) if source.dim == 1 else ()
    return TestField(f, 0.0, 1.0, f"sign{axis}", kinks,
                     {"kind": "sign", "threshold": threshold, "axis": axis})


def power_sign_field(source: SourceMeasure, alpha: float) -> TestField:
    """1-D field ``sign(x)|x|^alpha`` (a radial field centred at the origin)."""
    return radial_field(source, np.zeros(source.dim), alpha)


def bump_field(source: SourceMeasure, center, radius: float, alpha: float, vector) -> TestField:
    """``v * max(0, 1 - (|x - x0| / r)^alpha)``; Hölder constant ``|v| / r^alpha``."""
    x0 = np.asarray(center, dtype=float).ravel()
    v = np.asarray(vector, dtype=float).ravel()

    def f(x):
        r = np.linalg.norm(x - x0, axis=1) / radius
        return np.maximum(0.0, 1.0 - r**alpha)[:, None] * v

    nv = float(np.linalg.norm(v))
    kinks = (float(x0[0] - radius), float(x0[0]), float(x0[0] + radius)) if source.dim == 1 else ()
    return TestField(f, alpha, nv * (1 + radius**-alpha), "bump", kinks,
                     {"kind": "bump", "center": x0.tolist(), "radius": radius,
                      "vector": v.tolist(), "alpha": alpha})


def superposition(fields: Sequence[TestField], coefs, label: str = "sum") -> TestField:
    coefs = [float(c) for c in coefs]
    fs = list(fields)

    def f(x):
        return sum(c * g(x) for c, g in zip(coefs, fs))

    bound = sum(abs(c) * g.holder_bound for c, g in zip(coefs, fs))
    kinks = tuple(sorted({k for g in fs for k in g.kinks}))
    return TestField(f, min(g.alpha for g in fs), bound, label, kinks,
                     {"kind": "superposition", "coefs": coefs, "parts": [g.spec for g in fs]})


def make_test_family(alpha: float, count: int, seed: int, source: SourceMeasure) -> list[TestField]:
    """``count`` fields of unit Hölder norm: id and coordinates first, then
    seeded radial fields alternating with random bump superpositions."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    d = source.dim
    base = [identity_field(source, alpha)]
    if d > 1:
        base += [coordinate_field(source, k, alpha) for k in range(d)]
    fam = [f.normalized() for f in base[:count]]
    diam = source.diameter
    while len(fam) < count:
        if len(fam) % 2:
            c = uniform_points(source, 1, rng)[0]
            dirn = None if d == 1 else rng.normal(size=d)
            fam.append(radial_field(source, c, alpha, dirn).normalized())
        else:
            parts = []
            for _ in range(3):
                c = uniform_points(source, 1, rng)[0]
                v = rng.normal(size=d)
                parts.append(bump_field(source, c, diam * rng.uniform(0.1, 0.5), alpha,
                                        v / np.linalg.norm(v)))
            fam.append(superposition(parts, rng.normal(size=3), "bumps").normalized())
    return fam


# -- pairings -----------------------------------------------------------------

def _check(z_eps, diag0: LaguerreDiagram, source, target):
    if source is not None and source is not diag0.source:
        if source.describe() != diag0.source.describe():
            raise ValueError("source does not match the diagram's source")
    if not isinstance(z_eps, PotentialVector) or z_eps.eps is None:
        raise ValueError("z_eps must be an entropic PotentialVector")
    if target.dim != diag0.target.dim:
        raise ValueError("target dimension does not match the diagram")
    if len(z_eps) != target.n:
        raise ValueError(f"z_eps has {len(z_eps)} entries, target has {target.n} atoms")
    return z_eps.eps


def _offset_rule(z_eps, diag0, source, kinks=(), target=None):
    target = diag0.target if target is None else target
    eps = _check(z_eps, diag0, source, target)
    other = build_diagram(diag0.source, target, z_eps)
    rule = layered_rule(diag0, other, eps=eps, kinks=kinks)
    anchor = diag0.target.points[rule.owner]
    off = entropic_offset(target, _values(z_eps), eps, rule.x, anchor)
    return rule, off


def pair_difference_with_floor(phi: TestField, z_eps: PotentialVector, diag0: LaguerreDiagram,
                               source: SourceMeasure | None = None,
                               target=None) -> tuple[float, float]:
    """``(<phi, T_eps - T_0>_{L2(P)}, roundoff floor)``.

    ``target`` carries the atoms of ``z_eps`` when they differ from those of
    ``diag0`` (e.g. an empirical target against the population diagram).
    """
    rule, off = _offset_rule(z_eps, diag0, source, phi.kinks, target)
    vals = np.einsum("md,md->m", phi(rule.x), off)
    return float(rule.w @ vals), float(_ROUNDOFF * (rule.w @ np.abs(vals)))


def pair_difference(phi: TestField, z_eps: PotentialVector, diag0: LaguerreDiagram,
                    source: SourceMeasure | None = None, target=None) -> float:
    """``int <phi(x), T_eps(x) - T_0(x)> dP(x)``."""
    return pair_difference_with_floor(phi, z_eps, diag0, source, target)[0]


def pair_family(family: Sequence[TestField], z_eps, diag0, source=None,
                target=None) -> tuple[np.ndarray, np.ndarray]:
    """Pairings of every field in ``family`` and their roundoff floors, from one quadrature pass."""
    kinks = tuple(sorted({k for f in family for k in f.kinks}))
    rule, off = _offset_rule(z_eps, diag0, source, kinks, target)
    vals = [np.einsum("md,md->m", f(rule.x), off) for f in family]
    return (np.array([rule.w @ v for v in vals]),
            np.array([_ROUNDOFF * (rule.w @ np.abs(v)) for v in vals]))


def l2_sq_distance(z_eps: PotentialVector, diag0: LaguerreDiagram,
                   source: SourceMeasure | None = None, target=None) -> float:
    """``int |T_eps - T_0|^2 dP``."""
    rule, off = _offset_rule(z_eps, diag0, source, (), target)
    return float(rule.w @ np.einsum("md,md->m", off, off))


def dual_norm_lower_bound(z_eps, diag0, source, family: Sequence[TestField]) -> float:
    """Max of ``|pair_difference|`` over a family of fields with Hölder norm at most 1."""
    if not family:
        raise ValueError("family must be nonempty")
    if any(f.holder_bound > 1 + 1e-12 for f in family):
        raise ValueError("every family member needs holder_bound <= 1")
    return float(np.abs(pair_family(family, z_eps, diag0, source)[0]).max())


__all__ = ["TestField", "bump_field", "constant_field", "coordinate_field",
           "dual_norm_lower_bound", "identity_field", "l2_sq_distance", "make_test_family",
           "pair_difference", "pair_difference_with_floor", "pair_family", "power_sign_field",
           "radial_field", "sign_field", "superposition", "uniform_points"]
