"""Rate sweeps, sharp-constant checks, the tanh oracle and the CLT simulation."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import stats

from .eot_solver import solve_entropic, solve_entropic_path
from .geometry import LaguerreDiagram, build_diagram, facet_integral, mass_jacobian
from .functionals import (TestField, identity_field, l2_sq_distance, pair_difference,
                          pair_difference_with_floor, pair_family)
from .measures import DiscreteMeasure, SourceMeasure, sample_discrete
from .sd_solver import SolveReport, default_tol, solve_semidual

KINDS = ("pair", "l2", "dual", "potential")


@dataclass
class Problem:
    """A source/target pair plus solver settings; caches the unregularized solution."""

    source: SourceMeasure
    target: DiscreteMeasure
    name: str = "problem"
    tol: float | None = None
    max_iter: int = 200

    @property
    def solver_tol(self) -> float:
        return default_tol(self.source) if self.tol is None else self.tol

    @cached_property
    def unregularized(self) -> SolveReport:
        rep = solve_semidual(self.source, self.target, self.solver_tol)
        if not rep.converged:
            raise RuntimeError(f"{self.name}: semidual solve did not converge "
                               f"(residual {rep.residual:.2e})")
        return rep

    @cached_property
    def diagram0(self) -> LaguerreDiagram:
        rep = self.unregularized
        return build_diagram(self.source, rep.target, rep.potential)

    def entropic(self, eps: float, warm_start=None) -> SolveReport:
        return solve_entropic(self.source, self.target, eps, self.solver_tol, self.max_iter,
                              warm_start)


# -- rate fits -----------------------------------------------------------------

@dataclass
class RateFit:
    eps_grid: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    window: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    polylog: float | None = None

    def __post_init__(self):
        self.eps_grid = np.asarray(self.eps_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.eps_grid) >= 0):
            raise ValueError("eps_grid must be strictly decreasing")
        w = np.asarray(self.window, dtype=int)
        if w.size and not (np.all(np.isfinite(self.values[w])) and np.all(self.values[w] > 0)):
            raise ValueError("values on the fit window must be finite and positive")
        self.window = w

    def to_record(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "window": self.window.tolist(), "polylog": self.polylog,
                "residuals": self.residuals.tolist()}


def fit_rate(eps_grid, values, floors=None, failed=None, drop: int = 2,
             polylog: bool = False) -> RateFit:
    """Least-squares slope of ``log|value|`` against ``log eps``.

    The ``drop`` largest eps, failed points and values under ten times their
    noise floor are left out. With ``polylog`` a ``log log(1/eps)`` regressor is
    added and its coefficient reported.
    """
    eps = np.asarray(eps_grid, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    floors = np.zeros_like(vals) if floors is None else np.asarray(floors, dtype=float)
    failed = np.zeros(len(vals), bool) if failed is None else np.asarray(failed, bool)
    keep = np.ones(len(vals), bool)
    keep[np.argsort(-eps)[:drop]] = False
    keep &= ~failed & np.isfinite(vals) & (vals > 10 * floors) & (vals > 0)
    window = np.flatnonzero(keep)
    if len(window) < 2:
        return RateFit(eps, vals, math.nan, math.nan, math.nan, window)
    x, y = np.log(eps[window]), np.log(vals[window])
    cols = [x, np.ones_like(x)]
    if polylog:
        cols.insert(1, np.log(np.log(1 / eps[window])))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(res @ res) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(eps, vals, float(coef[0]), float(coef[-1]), min(1.0, max(0.0, r2)), window,
                   res, float(coef[1]) if polylog else None)


@dataclass
class Sweep:
    fit: RateFit
    rows: list[dict]
    kind: str


def rate_sweep(problem: Problem, eps_grid, kind: str = "pair", field: TestField | None = None,
               family: Sequence[TestField] | None = None, drop: int = 2,
               polylog: bool = False) -> Sweep:
    """Solve along ``eps_grid`` (warm-started) and fit the decay of a functional.

    ``kind``: ``pair`` (needs ``field``), ``l2``, ``dual`` (needs ``family``) or
    ``potential`` (sup-norm distance of the dual potentials).
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if len(eps_grid) < 6 or not np.all((eps_grid > 0) & (eps_grid < 1)):
        raise ValueError("eps_grid needs at least 6 points in (0, 1)")
    if kind == "pair" and field is None:
        field = identity_field(problem.source)
    if kind == "dual" and not family:
        raise ValueError("dual kind needs a nonempty family")
    diag0 = problem.diagram0
    z0 = problem.unregularized.potential.values
    if kind == "potential":
        lam = np.abs(np.linalg.eigvalsh(mass_jacobian(diag0)))
        pot_floor = problem.solver_tol / max(np.sort(lam)[1], 1e-300)
    reports = solve_entropic_path(problem.source, problem.target, eps_grid, problem.solver_tol,
                                  problem.max_iter)
    rows = []
    for eps, rep in zip(eps_grid, reports):
        ok = rep.converged
        z = rep.potential
        if kind == "pair":
            signed, floor = pair_difference_with_floor(field, z, diag0)
        elif kind == "l2":
            signed = l2_sq_distance(z, diag0)
            floor = 64 * np.finfo(float).eps * signed
        elif kind == "dual":
            vals, floors = pair_family(family, z, diag0)
            k = int(np.argmax(np.abs(vals)))
            signed, floor = float(vals[k]), float(floors[k])
        else:
            signed = float(np.abs(z.values - z0).max())
            floor = pot_floor
        rows.append({"eps": float(eps), "value": abs(signed), "signed": signed,
                     "floor": floor, "converged": ok, "fallback": rep.fallback,
                     "iterations": rep.iterations, "residual": rep.residual})
    fit = fit_rate(eps_grid, [r["value"] for r in rows], [r["floor"] for r in rows],
                   [not r["converged"] for r in rows], drop, polylog)
    for k, r in enumerate(rows):
        r["in_window"] = bool(k in set(fit.window.tolist()))
    return Sweep(fit, rows, kind)


# -- sharp constant ----------------------------------------------------------------

@dataclass(frozen=True)
class ConstantCheck:
    eps: float
    measured: float
    predicted: float

    @property
    def rel_gap(self) -> float:
        if self.predicted == 0:
            return abs(self.measured)
        return abs(self.measured / self.predicted - 1)

    def to_record(self) -> dict:
        return {**asdict(self), "rel_gap": self.rel_gap}


def predicted_constant(diag0: LaguerreDiagram) -> float:
    """``-(pi^2/24) sum_{i<j} int_{facet} rho / |y_i - y_j|`` over the facets of ``diag0``."""
    y = diag0.target.points
    total = sum(facet_integral(diag0, i, j) / np.linalg.norm(y[i] - y[j])
                for i, j in diag0.facets)
    return -(math.pi**2 / 24) * total


def constant_check(problem: Problem, eps_small: float = 1e-3) -> ConstantCheck:
    """Compare ``<id, T_eps - T_0> / eps^2`` with the facet prediction."""
    if not 0 < eps_small <= 1e-2:
        raise ValueError("eps_small must lie in (0, 1e-2]")
    reps = solve_entropic_path(problem.source, problem.target,
                               np.geomspace(1e-1, eps_small, 5), problem.solver_tol,
                               problem.max_iter)
    diag0 = problem.diagram0
    pair = pair_difference(identity_field(problem.source), reps[-1].potential, diag0)
    return ConstantCheck(eps_small, float(pair / eps_small**2), float(predicted_constant(diag0)))


# -- 1-D tanh oracle -----------------------------------------------------------------

def _breaks(eps):
    pts = [0.0]
    t = eps / 4
    while t < 1:
        pts.append(t)
        t *= 4
    return [mpmath.mpf(p) for p in pts] + [mpmath.mpf(1)]


def oracle_tanh(eps: float, kind: str = "power", alpha: float = 1.0, dps: int = 30) -> float:
    """Symmetric two-point instance on [-1, 1], where ``T_eps(x) = tanh(2x/eps)``.

    ``power``: ``int_0^1 x^alpha (tanh(2x/eps) - 1) dx``, which equals the
    pairing with ``sign(x)|x|^alpha`` (alpha = 0 gives the sign field);
    ``l2``: ``int_0^1 (tanh(2x/eps) - 1)^2 dx``, the squared L2 distance.
    """
    with mpmath.workdps(dps):
        e = mpmath.mpf(eps)
        a = mpmath.mpf(alpha)
        if kind == "power":
            f = lambda x: x**a * (mpmath.tanh(2 * x / e) - 1)
        elif kind == "l2":
            f = lambda x: (mpmath.tanh(2 * x / e) - 1) ** 2
        else:
            raise ValueError("kind must be 'power' or 'l2'")
        return float(mpmath.quad(f, _breaks(float(eps))))


def oracle_tanh_limit(kind: str = "power", alpha: float = 1.0, dps: int = 30) -> float:
    """``lim eps^-(1+alpha) oracle`` (power) or ``lim eps^-1 oracle`` (l2)."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        if kind == "power":
            f = lambda u: u**a * (mpmath.tanh(2 * u) - 1)
        elif kind == "l2":
            f = lambda u: (mpmath.tanh(2 * u) - 1) ** 2
        else:
            raise ValueError("kind must be 'power' or 'l2'")
        return float(mpmath.quad(f, [0, 1, 4, 16, mpmath.inf]))


# -- CLT simulation ----------------------------------------------------------------

@dataclass(frozen=True)
class PowerRule:
    """``eps_n = scale * n^-exponent``."""

    exponent: float = 0.3
    scale: float = 1.0

    def __call__(self, n: int) -> float:
        return self.scale * n ** (-self.exponent)

    def valid_for(self, alpha: float) -> bool:
        """Decay faster than ``n^-1/(2(1+alpha))`` and ``n^-1/4 / log^1.5 n``."""
        return self.exponent > 1 / (2 * (1 + alpha)) and self.exponent > 0.25


@dataclass
class CLTRow:
    n: int
    eps: float
    mean: float
    var: float
    se: float
    skewness: float
    excess_kurtosis: float
    gap_mean: float
    gap_abs_mean: float
    retries: int
    trials: int


@dataclass
class CLTResult:
    rows: list[CLTRow]
    samples: dict[int, np.ndarray]
    gaps: dict[int, np.ndarray]
    seed: int

    def variance_ratios(self) -> list[float]:
        return [b.var / a.var if a.var > 0 else math.nan for a, b in zip(self.rows, self.rows[1:])]

    def common_mean(self) -> float:
        w = np.array([1 / r.se**2 if r.se > 0 else 0.0 for r in self.rows])
        m = np.array([r.mean for r in self.rows])
        return float(w @ m / w.sum()) if w.sum() > 0 else float(m.mean())


def _trial(problem, diag0, phi, n, eps, seed, trial):
    retries = 0
    for attempt in range(20):
        key = [seed, trial, n] if attempt == 0 else [seed, trial, n, attempt]
        draw = int(np.random.SeedSequence(key).generate_state(1)[0])
        emp = sample_discrete(problem.target, n, draw)
        try:
            hat0 = solve_semidual(problem.source, emp, problem.solver_tol)
            hate = solve_entropic(problem.source, emp, eps, problem.solver_tol, problem.max_iter,
                                  warm_start=hat0.potential)
            if not (hat0.converged and hate.converged):
                raise RuntimeError("solver did not converge")
        except (RuntimeError, np.linalg.LinAlgError):
            retries += 1
            continue
        sub = hate.target
        s = pair_difference(phi, hate.potential, diag0, target=sub)
        dhat = build_diagram(problem.source, hat0.target, hat0.potential)
        g = pair_difference(phi, hate.potential, dhat)
        return math.sqrt(n) * s, math.sqrt(n) * g, retries
    raise RuntimeError(f"trial {trial} failed after {retries} retries")


def clt_sim(problem: Problem, n_list: Sequence[int], trials: int, seed: int,
            phi: TestField | None = None, eps_rule: Callable[[int], float] = PowerRule(),
            alpha: float = 1.0, threads: int = 1) -> CLTResult:
    """Monte-Carlo law of ``S = sqrt(n) <phi, hat T_eps_n - T_0>`` and of the
    regularization gap ``sqrt(n) <phi, hat T_eps_n - hat T_0>``.

    Trial ``t`` at sample size ``n`` draws from a stream keyed by
    ``(seed, t, n)``, so results do not depend on ``threads`` and different
    seeds never share trials.
    """
    if isinstance(eps_rule, PowerRule) and not eps_rule.valid_for(alpha):
        warnings.warn(f"eps_n = n^-{eps_rule.exponent} decays too slowly for alpha={alpha}",
                      stacklevel=2)
    phi = identity_field(problem.source) if phi is None else phi
    diag0 = problem.diagram0
    rows, samples, gaps = [], {}, {}
    for n in n_list:
        eps = float(eps_rule(n))
        job = lambda t: _trial(problem, diag0, phi, n, eps, seed, t)
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                out = list(pool.map(job, range(trials)))
        else:
            out = [job(t) for t in range(trials)]
        s = np.array([o[0] for o in out])
        g = np.array([o[1] for o in out])
        samples[n], gaps[n] = s, g
        var = float(s.var(ddof=1)) if trials > 1 else 0.0
        degenerate = var <= 1e-24 * max(1.0, float(np.abs(s).max()) ** 2)
        rows.append(CLTRow(
            n=int(n), eps=eps, mean=float(s.mean()), var=var, se=math.sqrt(var / trials),
            skewness=0.0 if degenerate else float(stats.skew(s)),
            excess_kurtosis=0.0 if degenerate else float(stats.kurtosis(s)),
            gap_mean=float(g.mean()), gap_abs_mean=float(np.abs(g).mean()),
            retries=sum(o[2] for o in out), trials=trials))
    return CLTResult(rows, samples, gaps, seed)
