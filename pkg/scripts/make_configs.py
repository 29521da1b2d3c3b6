"""Regenerate the shipped TOML configs in ``configs/`` (seeded instances included)."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from sdeot.measures import SourceMeasure

SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def _val(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return f'"{x}"'
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_val(v) for v in x) + "]"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def to_toml(cfg: dict) -> str:
    lines = [f"name = {_val(cfg['name'])}", ""]
    for sec in ("source", "target", "solver", "experiment"):
        if sec in cfg:
            lines.append(f"[{sec}]")
            lines += [f"{k} = {_val(v)}" for k, v in cfg[sec].items()]
            lines.append("")
    return "\n".join(lines)


def uniform_1d():
    return {"domain": [-1.0, 1.0], "density": "uniform", "lipschitz_bound": 0.0,
            "density_min": 0.5, "density_max": 0.5}


def uniform_square():
    return {"domain": SQUARE, "density": "uniform", "lipschitz_bound": 0.0,
            "density_min": 1.0, "density_max": 1.0}


def gaussian_square(mean, sigma):
    src = SourceMeasure.gaussian(np.array(SQUARE), mean, sigma)
    return {"domain": SQUARE, "density": "gaussian", "mean": list(mean), "sigma": sigma,
            "lipschitz_bound": float(np.ceil(src.lipschitz_bound * 1e6) / 1e6),
            "density_min": float(np.floor(src.density_min * 1e6) / 1e6),
            "density_max": float(np.ceil(src.density_max * 1e6) / 1e6)}


def seeded_weights(rng, n, floor):
    q = floor + (1 - n * floor) * rng.dirichlet(np.ones(n))
    return (q / q.sum()).tolist()


def configs() -> dict[str, dict]:
    out = {}
    out["symmetric-1d"] = {
        "name": "symmetric-1d", "source": uniform_1d(),
        "target": {"points": [[-1.0], [1.0]], "weights": [0.5, 0.5], "min_weight_floor": 0.25},
        "experiment": {"kind": "pair", "field": "identity", "alpha": 1.0, "eps_max": 0.1,
                       "eps_min": 1e-4, "eps_count": 16}}
    out["asymmetric-1d"] = {
        "name": "asymmetric-1d", "source": uniform_1d(),
        "target": {"points": [[-1.0], [1.0]], "weights": [1 / 3, 2 / 3],
                   "min_weight_floor": 0.25},
        "experiment": {"kind": "pair", "field": "identity", "n_list": [100, 400, 1600],
                       "trials": 500, "eps_exponent": 0.3}}
    out["asymmetric-1d-tilted"] = {
        "name": "asymmetric-1d-tilted",
        "source": {"domain": [-1.0, 1.0], "density": "spline", "knots": [-1.0, 1.0],
                   "values": [0.4, 0.6], "lipschitz_bound": 0.1, "density_min": 0.4,
                   "density_max": 0.6},
        "target": {"points": [[-1.0], [1.0]], "weights": [1 / 3, 2 / 3],
                   "min_weight_floor": 0.25},
        "solver": {"tol": 1e-14},
        "experiment": {"kind": "potential", "eps_max": 0.1, "eps_min": 1e-3, "eps_count": 9}}
    out["2d-square-2"] = {
        "name": "2d-square-2", "source": uniform_square(),
        "target": {"points": [[0.25, 0.5], [0.75, 0.5]], "weights": [0.5, 0.5],
                   "min_weight_floor": 0.25},
        "experiment": {"kind": "pair", "field": "identity", "eps_max": 0.1, "eps_min": 1e-3,
                       "eps_count": 9}}
    out["2d-square-4"] = {
        "name": "2d-square-4", "source": uniform_square(),
        "target": {"points": [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
                   "weights": [0.25] * 4, "min_weight_floor": 0.1},
        "experiment": {"kind": "pair", "field": "identity", "eps_max": 0.1, "eps_min": 1e-3,
                       "eps_count": 9}}
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.1, 0.9, (4, 2))
    out["2d-random-4"] = {
        "name": "2d-random-4", "source": uniform_square(),
        "target": {"points": pts.tolist(), "weights": seeded_weights(rng, 4, 0.1),
                   "min_weight_floor": 0.1},
        "solver": {"tol": 1e-14},
        "experiment": {"kind": "potential", "eps_max": 0.1, "eps_min": 1e-3, "eps_count": 9}}
    rng = np.random.default_rng(8)
    out["2d-random-8"] = {
        "name": "2d-random-8", "source": gaussian_square([0.4, 0.55], 0.5),
        "target": {"points": rng.uniform(0.05, 0.95, (8, 2)).tolist(),
                   "weights": seeded_weights(rng, 8, 0.05), "min_weight_floor": 0.05},
        "experiment": {"kind": "pair", "field": "identity", "eps_max": 0.1, "eps_min": 1e-3,
                       "eps_count": 9}}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "configs"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, cfg in configs().items():
        (out / f"{name}.toml").write_text(to_toml(cfg))
        print(out / f"{name}.toml")


if __name__ == "__main__":
    main()
