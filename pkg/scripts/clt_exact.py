"""Exact moments of the CLT statistic on the two-atom 1-D config.

With two atoms the empirical target depends only on the count k of draws at
the left atom, so k ~ Binomial(n, q) and every moment is a finite sum over k.
This removes Monte-Carlo noise from the comparison with ``sdeot clt``.
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np
from scipy import stats

from sdeot.config import load_config
from sdeot.eot_solver import solve_entropic
from sdeot.experiments import PowerRule, Problem
from sdeot.functionals import identity_field, pair_difference
from sdeot.geometry import build_diagram
from sdeot.measures import DiscreteMeasure
from sdeot.sd_solver import solve_semidual


def exact_moments(problem: Problem, n: int, eps: float, cutoff: float = 1e-15) -> dict:
    tgt = problem.target
    if tgt.n != 2:
        raise ValueError("exact enumeration needs a two-atom target")
    q = float(tgt.weights[0])
    phi = identity_field(problem.source)
    diag0 = problem.diagram0
    ks = np.arange(n + 1)
    pmf = stats.binom.pmf(ks, n, q)
    keep = pmf > cutoff
    s_vals, g_vals = [], []
    for k in ks[keep]:
        emp = DiscreteMeasure(tgt.points, [k / n, 1 - k / n], empirical=True)
        hat0 = solve_semidual(problem.source, emp, problem.solver_tol)
        hate = solve_entropic(problem.source, emp, eps, problem.solver_tol,
                              warm_start=hat0.potential)
        s_vals.append(pair_difference(phi, hate.potential, diag0, target=hate.target))
        dhat = build_diagram(problem.source, hat0.target, hat0.potential)
        g_vals.append(pair_difference(phi, hate.potential, dhat))
    w = pmf[keep] / pmf[keep].sum()
    s = math.sqrt(n) * np.array(s_vals)
    g = math.sqrt(n) * np.array(g_vals)
    mean = float(w @ s)
    return {"n": n, "eps": eps, "mean": mean, "var": float(w @ (s - mean) ** 2),
            "gap_mean": float(w @ g)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).parents[1] / "configs/asymmetric-1d.toml"))
    ap.add_argument("--n", type=int, nargs="+", default=[100, 400, 1600])
    ap.add_argument("--exponent", type=float, default=0.3)
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    p = Problem(cfg.source, cfg.target, cfg.name, cfg.solver.tol)
    rule = PowerRule(args.exponent)
    for n in args.n:
        print(json.dumps(exact_moments(p, n, float(rule(n)))))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
