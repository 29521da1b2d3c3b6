"""Input density P on a convex domain and discrete target Q.

Points are always handled as 2-D arrays of shape ``(m, d)`` with ``d`` in
{1, 2}; a 1-D domain is the interval ``[a, b]`` and a 2-D domain is a convex
polygon with counterclockwise vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import composite_gl, polygon_area, polygon_rule


class ValidationError(ValueError):
    """Raised when a measure violates its invariants; ``problems`` lists each one."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class QuadratureError(ArithmeticError):
    pass


class SamplingError(RuntimeError):
    pass


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1-D lists and (m, d) arrays to shape (m, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if dim in (None, 1) else x[None, :]
    return x


# ---------------------------------------------------------------- densities


class Density:
    breakpoints: tuple[float, ...] = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self) -> float:
        raise NotImplementedError

    def scaled(self, c: float) -> "Density":
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Density):
    value: float

    def __call__(self, x):
        return np.full(len(x), self.value)

    def lipschitz(self):
        return 0.0

    def scaled(self, c):
        return Uniform(self.value * c)

    def describe(self):
        return {"kind": "uniform", "value": self.value}


@dataclass(frozen=True)
class Gaussian(Density):
    """Isotropic Gaussian bump ``scale * exp(-|x - mean|^2 / (2 sigma^2))``."""

    mean: tuple[float, ...]
    sigma: float
    scale: float = 1.0

    def __call__(self, x):
        r2 = np.sum((x - np.asarray(self.mean)) ** 2, axis=1)
        return self.scale * np.exp(-0.5 * r2 / self.sigma**2)

    def lipschitz(self):
        return self.scale * math.exp(-0.5) / self.sigma

    def scaled(self, c):
        return Gaussian(self.mean, self.sigma, self.scale * c)

    def describe(self):
        return {"kind": "gaussian", "mean": list(self.mean), "sigma": self.sigma,
                "scale": self.scale}


@dataclass(frozen=True)
class PiecewiseLinear(Density):
    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) != len(self.values) or len(self.knots) < 2:
            raise ValidationError(["spline needs matching knots/values, at least 2"])
        if np.any(np.diff(self.knots) <= 0):
            raise ValidationError(["spline knots must be strictly increasing"])

    @property
    def breakpoints(self):
        return tuple(self.knots[1:-1])

    def __call__(self, x):
        return np.interp(x[:, 0], self.knots, self.values)

    def lipschitz(self):
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))

    def scaled(self, c):
        return PiecewiseLinear(self.knots, tuple(c * v for v in self.values))

    def describe(self):
        return {"kind": "spline", "knots": list(self.knots), "values": list(self.values)}


# ------------------------------------------------------------------ source


@dataclass(frozen=True)
class QuadratureSettings:
    order_1d: int = 32
    panels_1d: int = 8
    order_2d: int = 5
    level_2d: int = 4


@dataclass(frozen=True, eq=False)
class SourceMeasure:
    """Absolutely continuous P with a Lipschitz density bounded away from zero."""

    domain: np.ndarray
    density: Density
    lipschitz_bound: float
    density_min: float
    density_max: float
    quad: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=float)
        object.__setattr__(self, "domain", dom)
        problems = []
        if dom.ndim == 1:
            if dom.shape != (2,) or not np.all(np.isfinite(dom)) or not dom[0] < dom[1]:
                problems.append("1-D domain must be a finite interval [a, b] with a < b")
        elif dom.ndim == 2 and dom.shape[1] == 2:
            problems += _polygon_problems(dom)
        elif dom.ndim == 2 and dom.shape[1] >= 3:
            raise ValidationError([f"dimension {dom.shape[1]} not supported (d must be 1 or 2)"])
        else:
            problems.append(f"unrecognised domain shape {dom.shape}")
        if problems:
            raise ValidationError(problems)

        if not self.density_min > 0:
            problems.append("density_min must be positive")
        if self.density_max < self.density_min:
            problems.append("density_max must be >= density_min")
        if self.lipschitz_bound < 0:
            problems.append("lipschitz_bound must be nonnegative")
        if self.density.lipschitz() > self.lipschitz_bound * (1 + 1e-9) + 1e-12:
            problems.append(
                f"lipschitz_bound {self.lipschitz_bound} below the density's "
                f"Lipschitz constant {self.density.lipschitz():.6g}")
        x, _ = self.rule
        rho = self.density(x)
        if not np.all(np.isfinite(rho)):
            problems.append("density is not finite on the domain")
        else:
            lo, hi = float(rho.min()), float(rho.max())
            if lo < self.density_min * (1 - 1e-9):
                problems.append(f"density_min {self.density_min} exceeds density value {lo:.6g}")
            if hi > self.density_max * (1 + 1e-9):
                problems.append(f"density_max {self.density_max} below density value {hi:.6g}")
            mass = self.total_mass()
            if abs(mass - 1.0) > 1e-8:
                problems.append(f"density integrates to {mass:.12g}, not 1")
        if problems:
            raise ValidationError(problems)

    # -- shape --------------------------------------------------------------

    @property
    def dim(self) -> int:
        return 1 if self.domain.ndim == 1 else 2

    @property
    def volume(self) -> float:
        return domain_volume(self.domain)

    @cached_property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dim == 1:
            return self.domain[:1].copy(), self.domain[1:].copy()
        return self.domain.min(axis=0), self.domain.max(axis=0)

    @cached_property
    def vertices(self) -> np.ndarray:
        return self.domain.reshape(-1, 1) if self.dim == 1 else self.domain

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    @property
    def max_norm(self) -> float:
        """sup of |x| over the domain (attained at a vertex)."""
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return domain_contains(self.domain, x, tol)

    # -- quadrature ---------------------------------------------------------

    @cached_property
    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Lebesgue quadrature nodes (m, d) and weights (m,) on the domain."""
        if self.dim == 1:
            a, b = self.domain
            cuts = sorted({a, b, *(p for p in self.density.breakpoints if a < p < b)})
            panels = min(self.quad.panels_1d, max(1, 256 // (len(cuts) - 1)))
            breaks = np.concatenate(
                [np.linspace(u, v, panels + 1)[:-1] for u, v in zip(cuts[:-1], cuts[1:])] + [[b]])
            x, w = composite_gl(breaks, self.quad.order_1d)
            return x[:, None], w
        return polygon_rule(self.domain, self.quad.order_2d, self.quad.level_2d)

    def total_mass(self) -> float:
        x, w = self.rule
        return float(w @ self.density(x))

    def describe(self) -> dict:
        return {"domain": self.domain.tolist(), "density": self.density.describe(),
                "lipschitz_bound": self.lipschitz_bound, "density_min": self.density_min,
                "density_max": self.density_max}

    # -- constructors -------------------------------------------------------

    @classmethod
    def uniform(cls, domain, **kw) -> "SourceMeasure":
        dom = np.asarray(domain, dtype=float)
        val = 1.0 / domain_volume(dom)
        return cls(dom, Uniform(val), 0.0, val, val, **kw)

    @classmethod
    def gaussian(cls, domain, mean, sigma, **kw) -> "SourceMeasure":
        dom = np.asarray(domain, dtype=float)
        mean = tuple(float(m) for m in np.atleast_1d(mean))
        raw = Gaussian(mean, float(sigma))
        dens = raw.scaled(1.0 / _integrate_raw(dom, raw, kw.get("quad")))
        verts = dom.reshape(-1, 1) if dom.ndim == 1 else dom
        lo = float(dens(verts).min())
        hi = float(dens(_nearest_point(dom, np.asarray(mean))[None]).max())
        return cls(dom, dens, dens.lipschitz(), lo, hi, **kw)

    @classmethod
    def spline(cls, knots, values, **kw) -> "SourceMeasure":
        raw = PiecewiseLinear(tuple(map(float, knots)), tuple(map(float, values)))
        dom = np.array([raw.knots[0], raw.knots[-1]])
        dens = raw.scaled(1.0 / _integrate_raw(dom, raw, kw.get("quad")))
        return cls(dom, dens, dens.lipschitz(), min(dens.values), max(dens.values), **kw)


def domain_volume(domain: np.ndarray) -> float:
    domain = np.asarray(domain, dtype=float)
    if domain.ndim == 1:
        return float(domain[1] - domain[0])
    return polygon_area(domain)


def domain_contains(domain: np.ndarray, x, tol: float = 1e-12) -> np.ndarray:
    if domain.ndim == 1:
        x = as_points(x, 1)
        a, b = domain
        return (x[:, 0] >= a - tol) & (x[:, 0] <= b + tol)
    x = as_points(x, 2)
    e = np.roll(domain, -1, axis=0) - domain
    rel = x[:, None, :] - domain[None]
    cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
    return np.all(cross >= -tol * np.linalg.norm(e, axis=1), axis=1)


def _polygon_problems(v: np.ndarray) -> list[str]:
    if len(v) < 3:
        return ["polygon domain needs at least 3 vertices"]
    if not np.all(np.isfinite(v)):
        return ["polygon vertices must be finite"]
    area = polygon_area(v)
    scale = float(np.max(np.abs(v))) or 1.0
    if abs(area) <= 1e-14 * scale**2:
        return ["polygon domain has empty interior (collinear vertices)"]
    if area < 0:
        return ["polygon vertices must be listed counterclockwise"]
    e = np.roll(v, -1, axis=0) - v
    f = np.roll(e, -1, axis=0)
    cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
    if np.any(cross < -1e-12 * scale**2):
        return ["polygon domain is not convex"]
    return []


def _integrate_raw(dom, density, quad) -> float:
    quad = quad or QuadratureSettings()
    if dom.ndim == 1:
        a, b = dom
        cuts = sorted({a, b, *(p for p in density.breakpoints if a < p < b)})
        x, w = composite_gl(np.concatenate(
            [np.linspace(u, v, quad.panels_1d + 1)[:-1] for u, v in zip(cuts[:-1], cuts[1:])]
            + [[b]]), quad.order_1d)
        return float(w @ density(x[:, None]))
    x, w = polygon_rule(dom, quad.order_2d, quad.level_2d)
    return float(w @ density(x))


def _nearest_point(dom: np.ndarray, p: np.ndarray) -> np.ndarray:
    if dom.ndim == 1:
        return np.clip(p, dom[0], dom[1])
    if domain_contains(dom, p[None])[0]:
        return p
    best, dist = None, np.inf
    for k in range(len(dom)):
        a, b = dom[k], dom[(k + 1) % len(dom)]
        t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
        q = a + t * (b - a)
        if np.linalg.norm(q - p) < dist:
            best, dist = q, np.linalg.norm(q - p)
    return best


# -------------------------------------------------------------- operations


def integrate(source: SourceMeasure, f) -> float | np.ndarray:
    """Integral of ``f`` against P with the source's quadrature rule.

    ``f`` maps an (m, d) array to values of shape (m,) or (m, k).
    """
    x, w = source.rule
    vals = np.asarray(f(x), dtype=float)
    bad = ~np.isfinite(vals.reshape(len(x), -1)).all(axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise QuadratureError(f"integrand is not finite at node {k}, x = {x[k].tolist()}")
    out = np.tensordot(w * source.density(x), vals, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def sample(source: SourceMeasure, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws from P by rejection from the bounding box, shape (n, d)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = source.bounding_box
    out = []
    got = proposed = 0
    batch = max(1024, 2 * n)
    while got < n:
        x = lo + (hi - lo) * rng.random((batch, source.dim))
        u = rng.random(batch) * source.density_max
        inside = source.contains(x, tol=0.0)
        keep = np.zeros(batch, dtype=bool)
        keep[inside] = u[inside] <= source.density(x[inside])
        out.append(x[keep])
        got += int(keep.sum())
        proposed += batch
        if proposed >= 10**6 and got / proposed < 1e-6:
            raise SamplingError(f"acceptance rate {got / proposed:.2e} below 1e-6")
    return np.concatenate(out)[:n]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported Q = sum_i q_i delta_{y_i}.

    ``empirical`` measures (from :func:`sample_discrete`) may carry zero
    weights; solvers drop those atoms before solving.
    """

    points: np.ndarray
    weights: np.ndarray
    min_weight_floor: float = 0.0
    empirical: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        q = np.asarray(self.weights, dtype=float).ravel()
        problems = []
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValidationError(["points must be a non-empty (N, d) array"])
        if pts.shape[1] not in (1, 2):
            raise ValidationError([f"dimension {pts.shape[1]} not supported (d must be 1 or 2)"])
        if len(q) != len(pts):
            raise ValidationError([f"{len(q)} weights for {len(pts)} points"])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(pts))):
            raise ValidationError(["points and weights must be finite"])
        if np.any(q < 0):
            problems.append("weights must be nonnegative")
        total = q.sum()
        if not total > 0 or abs(total - 1.0) > 1e-6:
            problems.append(f"weights sum to {total:.12g}, expected 1")
        elif not self.empirical:
            q = q / total
        if not self.empirical:
            if np.any(q <= 0):
                problems.append("all weights must be positive")
            elif q.min() < self.min_weight_floor:
                problems.append(
                    f"min weight {q.min():.6g} below min_weight_floor {self.min_weight_floor}")
        if not 0 <= self.min_weight_floor < 1:
            problems.append("min_weight_floor must lie in [0, 1)")
        if len(pts) > 1 and _min_pair_distance(pts) <= 0:
            problems.append("support points must be pairwise distinct")
        if problems:
            raise ValidationError(problems)
        pts.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", q)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def min_pair_distance(self) -> float:
        return _min_pair_distance(self.points)

    @cached_property
    def diameter(self) -> float:
        if self.n == 1:
            return 0.0
        p = self.points
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=-1)))

    @property
    def zero_atoms(self) -> np.ndarray:
        return np.flatnonzero(self.weights == 0)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def drop_zero(self) -> tuple["DiscreteMeasure", np.ndarray]:
        """Measure restricted to positive-weight atoms, plus the kept indices."""
        kept = np.flatnonzero(self.weights > 0)
        if len(kept) == self.n:
            return self, kept
        floor = min(self.min_weight_floor, float(self.weights[kept].min()))
        return DiscreteMeasure(self.points[kept], self.weights[kept], floor, self.empirical), kept

    def describe(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist(),
                "min_weight_floor": self.min_weight_floor}


def _min_pair_distance(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return math.inf
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d[np.diag_indices(len(pts))] = np.inf
    return float(d.min())


def sample_discrete(target: DiscreteMeasure, n: int, seed: int) -> DiscreteMeasure:
    """Empirical measure of ``n`` draws from ``target`` on the same support."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, target.weights)
    q = counts / n
    # make the float sum exactly 1 by absorbing the rounding into the largest atom
    k = int(np.argmax(q))
    q[k] = 0.0
    q[k] = 1.0 - math.fsum(q)
    return DiscreteMeasure(target.points, q, target.min_weight_floor, empirical=True)
