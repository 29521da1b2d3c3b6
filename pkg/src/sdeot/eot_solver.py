"""Newton solver for the entropic semidual problem.

The first-order condition is ``G(eps, z) = 0`` with
``G_i = int softmax_i((<x, y_j> - z_j) / tau) dP(x) - q_i`` and ``tau = eps / 2``
(see :mod:`sdeot.maps` for the convention). Integrals use the layered rule
on the Laguerre diagram of the current ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import PotentialVector, _values, voronoi_potential
from .layers import LayeredRule, layered_rule
from .maps import softmax_weights, temperature
from .measures import DiscreteMeasure, SourceMeasure
from .sd_solver import SolveReport, _diagram, _restrict, default_tol, solve_deflated, solve_semidual


@dataclass
class _State:
    source: SourceMeasure
    target: DiscreteMeasure
    eps: float
    z: np.ndarray

    @cached_property
    def rule(self) -> LayeredRule:
        return layered_rule(_diagram(self.source, self.target, self.z), eps=self.eps)

    @cached_property
    def weights(self) -> np.ndarray:
        return softmax_weights(self.rule.x, self.target, self.z, self.eps)

    @cached_property
    def G(self) -> np.ndarray:
        return self.weights.T @ self.rule.w - self.target.weights

    @cached_property
    def jacobian(self) -> np.ndarray:
        W = self.weights
        C = (W * self.rule.w[:, None]).T @ W / temperature(self.eps)
        np.fill_diagonal(C, 0.0)
        C[np.diag_indices_from(C)] = -C.sum(axis=1)
        return C

    @cached_property
    def objective(self) -> float:
        tau = temperature(self.eps)
        raw = self.rule.x @ self.target.points.T - self.z
        top = raw.max(axis=1)
        lse = top + tau * np.log(np.exp((raw - top[:, None]) / tau).sum(axis=1))
        return float(self.rule.w @ lse + self.z @ self.target.weights)


def _check_eps(eps):
    if not eps > 0:
        raise ValueError("eps must be positive")


def eval_G(source: SourceMeasure, target: DiscreteMeasure, eps: float, z) -> np.ndarray:
    """Entropic mass defect ``G(eps, z)``; its entries sum to zero."""
    _check_eps(eps)
    return _State(source, target, eps, _values(z)).G


def eval_G_jacobian(source, target, eps, z) -> tuple[np.ndarray, np.ndarray]:
    """``G`` and its derivative in ``z`` (symmetric, rows sum to zero)."""
    _check_eps(eps)
    st = _State(source, target, eps, _values(z))
    return st.G, st.jacobian


def entropic_objective(source, target, eps, z) -> float:
    """``int tau log sum_i exp((<x, y_i> - z_i) / tau) dP + <z, q>``; its gradient is ``-G``."""
    _check_eps(eps)
    return _State(source, target, eps, _values(z)).objective


def _newton(source, tgt, eps, z, tol, max_iter):
    st = _State(source, tgt, eps, z)
    res = float(np.abs(st.G).max())
    history = [st.objective]
    # potential gaps beyond this only empty cells out, so longer steps are pointless
    cap = max(source.diameter * tgt.diameter, 1e-12)
    it = 0
    while res > tol and it < max_iter:
        try:
            dz = solve_deflated(st.jacobian, -st.G)
        except np.linalg.LinAlgError:
            return st, res, it, history, False
        big = np.abs(dz).max()
        if big > cap:
            dz *= cap / big
        theta = 1.0
        while theta >= 2.0**-30:
            zn = st.z + theta * dz
            cand = _State(source, tgt, eps, zn - zn.mean())
            rn = float(np.abs(cand.G).max())
            if rn <= (1 - 0.25 * theta) * res or rn <= tol:
                break
            theta *= 0.5
        else:
            return st, res, it, history, False
        st, res = cand, rn
        history.append(st.objective)
        it += 1
    return st, res, it, history, res <= tol


def solve_entropic(source: SourceMeasure, target: DiscreteMeasure, eps: float,
                   tol: float | None = None, max_iter: int = 200, warm_start=None,
                   _allow_fallback: bool = True) -> SolveReport:
    """Zero-sum ``z_eps`` with ``|G(eps, z_eps)|_inf <= tol``.

    If Newton breaks down from the given start, the unregularized solution is
    used as the start instead and ``report.fallback`` is set.
    """
    _check_eps(eps)
    tol = default_tol(source) if tol is None else tol
    tgt, kept = target.drop_zero()
    z = _restrict(warm_start, target, kept)
    if z is None:
        z = voronoi_potential(tgt).values.copy()
    fallback = False
    st, res, it, hist, ok = _newton(source, tgt, eps, z, tol, max_iter)
    if not ok and _allow_fallback:
        fallback = True
        z0 = solve_semidual(source, tgt).potential.values
        st, res, it, hist, ok = _newton(source, tgt, eps, z0, tol, max_iter)
    return SolveReport(PotentialVector.normalized(st.z, eps), res, it, st.objective, ok,
                       tgt, kept, fallback=fallback, history=hist)


def solve_entropic_path(source, target, eps_grid, tol=None, max_iter=200,
                        warm_start=None) -> list[SolveReport]:
    """Solve along ``eps_grid`` from the largest eps down, warm-starting each solve.

    Reports are returned in the order of ``eps_grid``.
    """
    eps_grid = [float(e) for e in eps_grid]
    order = sorted(range(len(eps_grid)), key=lambda k: -eps_grid[k])
    out: list[SolveReport | None] = [None] * len(eps_grid)
    z = warm_start
    for k in order:
        rep = solve_entropic(source, target, eps_grid[k], tol, max_iter, warm_start=z)
        out[k] = rep
        if rep.converged:
            z = rep.potential.values if len(rep.support) == target.n else None
    return out
