"""Damped Newton solver for the unregularized semidual problem.

Minimises ``int max_i(<x, y_i> - z_i) dP(x) + <z, q>`` over zero-sum ``z``;
at the optimum every Laguerre cell carries exactly its target mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (DegenerateCellWarning, LaguerreDiagram, PotentialVector, _values,
                       build_diagram, mass_jacobian, voronoi_potential)
from .measures import DiscreteMeasure, SourceMeasure


@dataclass
class SolveReport:
    potential: PotentialVector
    residual: float
    iterations: int
    objective: float
    converged: bool
    target: DiscreteMeasure
    support: np.ndarray
    fallback: bool = False
    history: list = field(default_factory=list)

    @property
    def eps(self) -> float | None:
        return self.potential.eps

    def to_record(self) -> dict:
        return {"z": self.potential.values.tolist(), "eps": self.eps,
                "residual": self.residual, "iterations": self.iterations,
                "objective": self.objective, "converged": self.converged,
                "support": self.support.tolist(), "fallback": self.fallback}


def default_tol(source: SourceMeasure) -> float:
    return 1e-10 if source.dim == 1 else 1e-8


def solve_deflated(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``J dz = rhs`` on the zero-sum subspace via a bordered system."""
    n = len(rhs)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = J
    A[:n, n] = A[n, :n] = 1.0
    b = np.append(rhs, 0.0)
    sol = np.linalg.solve(A, b)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("non-finite Newton step")
    return sol[:n]


def _diagram(source, target, z) -> LaguerreDiagram:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCellWarning)
        return build_diagram(source, target, z)


def _objective(diag: LaguerreDiagram) -> float:
    y = diag.target.points
    total = 0.0
    for i in range(diag.n):
        x, w = diag.cell_rule(i)
        if len(w):
            rho = w * diag.source.density(x)
            total += float(rho @ (x @ y[i])) - diag.z[i] * float(rho.sum())
    return total + float(diag.z @ diag.target.weights)


def semidual_objective(source: SourceMeasure, target: DiscreteMeasure, z) -> float:
    """Value of the unregularized semidual at ``z`` (any real vector)."""
    return _objective(_diagram(source, target, z))


def _restrict(z_init, target, kept):
    if z_init is None:
        return None
    z = _values(z_init)
    if len(z) == target.n and len(kept) != target.n:
        z = z[kept]
    return z - z.mean()


def _nonempty_start(source, target, z):
    """Entropic continuation from large eps until every Laguerre cell has mass."""
    from .eot_solver import solve_entropic

    floor = 0.5 * target.weights.min()
    eps = 0.5 * max(source.diameter, 1e-12) * max(target.diameter, 1e-12)
    for _ in range(40):
        rep = solve_entropic(source, target, eps, tol=1e-3 * floor, warm_start=z,
                             _allow_fallback=False)
        z = rep.potential.values
        if _diagram(source, target, z).masses.min() >= floor:
            return z
        eps *= 0.25
    raise RuntimeError("could not find a potential with all cells nonempty")


def solve_semidual(source: SourceMeasure, target: DiscreteMeasure, tol: float | None = None,
                   max_iter: int = 100, z_init=None) -> SolveReport:
    """Potential ``z0`` whose Laguerre cells carry the target masses.

    Zero-weight atoms are removed first; ``report.support`` maps the solved
    atoms back to ``target``. The default start is the Voronoi potential.
    """
    tol = default_tol(source) if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")
    tgt, kept = target.drop_zero()
    q = tgt.weights
    z = _restrict(z_init, target, kept)
    if z is None:
        z = voronoi_potential(tgt).values.copy()
    diag = _diagram(source, tgt, z)
    if tgt.n > 1 and diag.masses.min() <= 0:
        z = _nonempty_start(source, tgt, z)
        diag = _diagram(source, tgt, z)
    floor = 0.5 * min(q.min(), diag.masses.min())
    F = diag.masses - q
    res = float(np.abs(F).max())
    obj = _objective(diag)
    history = [obj]
    it = 0
    while res > tol and it < max_iter:
        try:
            dz = solve_deflated(mass_jacobian(diag), -F)
        except np.linalg.LinAlgError:
            break
        theta = 1.0
        accepted = False
        while theta >= 2.0**-30:
            zn = z + theta * dz
            zn -= zn.mean()
            dn = _diagram(source, tgt, zn)
            Fn = dn.masses - q
            rn = float(np.abs(Fn).max())
            if dn.masses.min() >= floor and rn <= (1 - 0.5 * theta) * res:
                on = _objective(dn)
                if on <= obj + 1e-13 * (1 + abs(obj)):
                    accepted = True
                    break
            theta *= 0.5
        if not accepted:
            break
        z, diag, F, res, obj = zn, dn, Fn, rn, on
        history.append(obj)
        it += 1
    return SolveReport(PotentialVector.normalized(z), res, it, obj, res <= tol, tgt, kept,
                       history=history)
