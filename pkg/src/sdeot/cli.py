"""``sdeot`` command line: run one experiment from a TOML config and write
``results.csv``, ``summary.json`` and ``meta.json`` into ``--out``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .eot_solver import solve_entropic_path
from .experiments import (PowerRule, Problem, clt_sim, constant_check, oracle_tanh,
                          oracle_tanh_limit, rate_sweep)
from .functionals import (identity_field, make_test_family, power_sign_field, sign_field)
from .measures import ValidationError

COMMANDS = ("solve", "entropic", "rates", "constant", "clt", "oracle")


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _field(cfg: RunConfig):
    src, e = cfg.source, cfg.experiment
    if e.field == "identity":
        return identity_field(src)
    if e.field == "power_sign":
        return power_sign_field(src, e.alpha)
    if e.field == "sign":
        return sign_field(src)
    raise ValidationError([f"experiment.field must be identity, power_sign or sign, got {e.field!r}"])


def _problem(cfg: RunConfig) -> Problem:
    return Problem(cfg.source, cfg.target, cfg.name, cfg.solver.tol, cfg.solver.max_iter)


def run_solve(cfg, args):
    p = _problem(cfg)
    rep = p.unregularized
    d = p.diagram0
    rows = [{"atom": int(k), "point": rep.target.points[i].tolist(),
             "weight": float(rep.target.weights[i]), "z": float(rep.potential.values[i]),
             "mass": float(d.masses[i])} for i, k in enumerate(rep.support)]
    return rows, {"solve": rep.to_record(), "z": rep.potential.values.tolist(),
                  "diagram": d.to_dict()}, ("diagram", d)


def run_entropic(cfg, args):
    p = _problem(cfg)
    z0 = p.unregularized.potential.values
    grid = cfg.experiment.eps_grid
    reps = solve_entropic_path(p.source, p.target, grid, p.solver_tol, p.max_iter)
    rows = [{"eps": float(e), "residual": r.residual, "iterations": r.iterations,
             "converged": r.converged, "fallback": r.fallback,
             "dist_z0": float(np.abs(r.potential.values - z0).max()),
             "z": r.potential.values.tolist()} for e, r in zip(grid, reps)]
    return rows, {"z0": z0.tolist(), "solves": [r.to_record() for r in reps]}, None


def run_rates(cfg, args):
    e = cfg.experiment
    p = _problem(cfg)
    kw = {}
    if e.kind == "pair":
        kw["field"] = _field(cfg)
    elif e.kind == "dual":
        seed = e.family_seed if args.seed is None else args.seed
        kw["family"] = make_test_family(e.alpha, e.family_count, seed, cfg.source)
    sweep = rate_sweep(p, e.eps_grid, e.kind, polylog=e.polylog, **kw)
    summary = {"kind": e.kind, "fit": sweep.fit.to_record(), "slope": sweep.fit.slope}
    if "field" in kw:
        summary["field"] = kw["field"].spec
    if "family" in kw:
        summary["family"] = [f.spec for f in kw["family"]]
    return sweep.rows, summary, ("rates", sweep)


def run_constant(cfg, args):
    p = _problem(cfg)
    small = cfg.experiment.eps_small
    eps_list = [x for x in (1e-2, 3e-3, 1e-3, 3e-4, 1e-4) if x >= small * (1 - 1e-12)]
    checks = [constant_check(p, e) for e in eps_list]
    rows = [c.to_record() for c in checks]
    return rows, {"constant": checks[-1].to_record()}, None


def run_clt(cfg, args):
    e = cfg.experiment
    rule = PowerRule(e.eps_exponent)
    seed = 0 if args.seed is None else args.seed
    res = clt_sim(_problem(cfg), e.n_list, e.trials, seed, _field(cfg), rule, e.alpha,
                  args.threads)
    rows = [vars(r).copy() for r in res.rows]
    return rows, {"clt": rows, "seed": seed, "common_mean": res.common_mean(),
                  "variance_ratios": res.variance_ratios(),
                  "eps_rule_valid": rule.valid_for(e.alpha)}, None


def run_oracle(cfg, args):
    e = cfg.experiment
    kind, alpha = ("l2", 1.0) if e.kind == "l2" else ("power", e.alpha)
    power = 1.0 if kind == "l2" else 1.0 + alpha
    rows = []
    for eps in e.eps_grid:
        v = oracle_tanh(float(eps), kind, alpha)
        rows.append({"eps": float(eps), "value": v, "scaled": v / eps**power})
    return rows, {"kind": kind, "alpha": alpha, "limit": oracle_tanh_limit(kind, alpha)}, None


RUNNERS = {"solve": run_solve, "entropic": run_entropic, "rates": run_rates,
           "constant": run_constant, "clt": run_clt, "oracle": run_oracle}


def _write_csv(path: Path, rows: list[dict]):
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([json.dumps(_clean(r.get(k))) if isinstance(r.get(k), (list, dict))
                        else repr(_clean(r.get(k))) if isinstance(r.get(k), float)
                        else _clean(r.get(k)) for k in cols])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def _versions() -> dict:
    import mpmath
    import scipy
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "mpmath": mpmath.__version__, "sdeot": __version__}


def _plot(path: Path, payload):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind, obj = payload
    fig, ax = plt.subplots(figsize=(5, 4))
    if kind == "rates":
        f = obj.fit
        ax.loglog(f.eps_grid, f.values, "o", label="value")
        w = f.window
        if len(w):
            ax.loglog(f.eps_grid[w], np.exp(f.intercept) * f.eps_grid[w] ** f.slope, "-",
                      label=f"slope {f.slope:.3f}")
        ax.set_xlabel("eps")
        ax.legend()
    else:
        d = obj
        if d.source.dim == 2:
            for c in d.cells:
                if not c.empty:
                    v = np.vstack([c.vertices, c.vertices[:1]])
                    ax.plot(v[:, 0], v[:, 1], "k-", lw=0.8)
            ax.plot(d.target.points[:, 0], d.target.points[:, 1], "r.")
            ax.set_aspect("equal")
        else:
            for c in d.cells:
                if not c.empty:
                    ax.plot(c.vertices, [c.index, c.index], "-", lw=3)
            ax.set_xlabel("x")
            ax.set_ylabel("cell")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdeot", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML problem config")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE", help="override a config entry, e.g. experiment.alpha=0.5")
    ap.add_argument("--svg", action="store_true", help="also write plot.svg")
    return ap


def _fail(code: int, record: dict) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
    except ValidationError as exc:
        return _fail(2, {"error": "validation", "problems": exc.problems})
    except OSError as exc:
        return _fail(3, {"error": "io", "message": str(exc)})
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _fail(3, {"error": "io", "message": f"cannot write to {out}: {exc}"})
    try:
        rows, summary, plot = RUNNERS[args.command](cfg, args)
    except ValidationError as exc:
        return _fail(2, {"error": "validation", "problems": exc.problems})
    except (RuntimeError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(1, {"error": "runtime", "message": str(exc)})
    summary = {"command": args.command, "config": cfg.raw, "config_hash": cfg.digest,
               "seed": args.seed, "results": summary}
    meta = {"timestamp": datetime.now(timezone.utc).isoformat(), "versions": _versions(),
            "config_hash": cfg.digest, "seed": args.seed, "command": args.command,
            "threads": args.threads}
    try:
        _write_csv(out / "results.csv", rows)
        _write_json(out / "summary.json", summary)
        _write_json(out / "meta.json", meta)
        if args.svg and plot is not None:
            _plot(out / "plot.svg", plot)
    except OSError as exc:
        return _fail(3, {"error": "io", "message": str(exc)})
    return 0


if __name__ == "__main__":
    sys.exit(main())
