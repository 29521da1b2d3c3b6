"""TOML problem configs: parsing, validation, overrides and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .measures import (Gaussian, PiecewiseLinear, SourceMeasure, Uniform, ValidationError,
                       DiscreteMeasure, _integrate_raw, domain_volume)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SOURCE_REQUIRED = ("domain", "density", "lipschitz_bound", "density_min", "density_max")
TARGET_REQUIRED = ("points", "weights")
DENSITIES = ("uniform", "gaussian", "spline")


@dataclass
class ExperimentConfig:
    kind: str = "pair"
    field: str = "identity"
    alpha: float = 1.0
    eps_max: float = 1e-1
    eps_min: float = 1e-4
    eps_count: int = 16
    family_count: int = 32
    family_seed: int = 0
    eps_small: float = 1e-3
    n_list: list = dc_field(default_factory=lambda: [100, 400, 1600])
    trials: int = 500
    eps_exponent: float = 0.3
    polylog: bool = False

    @property
    def eps_grid(self) -> np.ndarray:
        return np.geomspace(self.eps_max, self.eps_min, self.eps_count)


@dataclass
class SolverConfig:
    tol: float | None = None
    max_iter: int = 200


@dataclass
class RunConfig:
    name: str
    source: SourceMeasure
    target: DiscreteMeasure
    solver: SolverConfig
    experiment: ExperimentConfig
    raw: dict

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


def _num(x):
    return float(x) if isinstance(x, str) else x


def _floats(x):
    return np.asarray(_deep(x, float), dtype=float)


def _deep(x, f):
    return [_deep(v, f) for v in x] if isinstance(x, list) else f(x)


def load_raw(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError([f"{path}: {exc}"]) from exc


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ValidationError([f"override {text!r} must look like section.key=value"])
    key, value = text.split("=", 1)
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return key.strip().split("."), parsed


def apply_overrides(raw: dict, overrides) -> dict:
    out = copy.deepcopy(raw)
    for text in overrides or ():
        keys, value = parse_override(text)
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ValidationError([f"override {text!r}: {k} is not a section"])
        node[keys[-1]] = value
    return out


def _build_source(sec: dict, problems: list[str]) -> SourceMeasure | None:
    missing = [k for k in SOURCE_REQUIRED if k not in sec]
    problems += [f"source.{k} is required" for k in missing]
    if missing:
        return None
    kind = sec["density"]
    if kind not in DENSITIES:
        problems.append(f"source.density must be one of {DENSITIES}, got {kind!r}")
        return None
    try:
        dom = _floats(sec["domain"])
        if kind == "uniform":
            dens = Uniform(1.0 / domain_volume(dom))
        elif kind == "gaussian":
            raw = Gaussian(tuple(_floats(sec["mean"]).ravel()), float(_num(sec["sigma"])))
            dens = raw.scaled(1.0 / _integrate_raw(dom, raw, None))
        else:
            knots = tuple(_floats(sec["knots"]))
            raw = PiecewiseLinear(knots, tuple(_floats(sec["values"])))
            if dom.shape != (2,) or dom[0] != knots[0] or dom[1] != knots[-1]:
                problems.append("source.knots must start and end at the domain endpoints")
                return None
            dens = raw.scaled(1.0 / _integrate_raw(dom, raw, None))
        return SourceMeasure(dom, dens, float(_num(sec["lipschitz_bound"])),
                             float(_num(sec["density_min"])), float(_num(sec["density_max"])))
    except KeyError as exc:
        problems.append(f"source.{exc.args[0]} is required for density {kind!r}")
    except ValidationError as exc:
        problems += [f"source: {p}" for p in exc.problems]
    except (TypeError, ValueError) as exc:
        problems.append(f"source: {exc}")
    return None


def _build_target(sec: dict, problems: list[str]) -> DiscreteMeasure | None:
    missing = [k for k in TARGET_REQUIRED if k not in sec]
    problems += [f"target.{k} is required" for k in missing]
    if missing:
        return None
    try:
        return DiscreteMeasure(_floats(sec["points"]), _floats(sec["weights"]),
                               float(_num(sec.get("min_weight_floor", 0.0))))
    except ValidationError as exc:
        problems += [f"target: {p}" for p in exc.problems]
    except (TypeError, ValueError) as exc:
        problems.append(f"target: {exc}")
    return None


def _section(cls, sec: dict, name: str, problems: list[str]):
    known = set(cls.__dataclass_fields__)
    extra = sorted(set(sec) - known)
    problems += [f"{name}.{k} is not a recognised key" for k in extra]
    vals = {}
    for k, v in sec.items():
        if k not in known:
            continue
        kind = str(cls.__dataclass_fields__[k].type)
        try:
            if "float" in kind:
                v = float(v)
            elif kind == "int":
                if isinstance(v, float) and not v.is_integer():
                    raise ValueError(f"expected an integer, got {v}")
                v = int(v)
            elif kind == "bool" and not isinstance(v, bool):
                raise ValueError(f"expected true or false, got {v!r}")
            elif kind == "list":
                v = [int(x) for x in v]
        except (TypeError, ValueError) as exc:
            problems.append(f"{name}.{k}: {exc}")
            continue
        vals[k] = v
    return cls(**vals)


def build_config(raw: dict) -> RunConfig:
    """Validate a raw config dict; every problem found is listed in the error."""
    problems: list[str] = []
    for sec in ("source", "target"):
        if not isinstance(raw.get(sec), dict):
            problems.append(f"[{sec}] section is required")
    if problems:
        raise ValidationError(problems)
    source = _build_source(raw["source"], problems)
    target = _build_target(raw["target"], problems)
    solver = _section(SolverConfig, raw.get("solver", {}), "solver", problems)
    exp = _section(ExperimentConfig, raw.get("experiment", {}), "experiment", problems)
    if source is not None and target is not None and source.dim != target.dim:
        problems.append(f"source is {source.dim}-D but target points are {target.dim}-D")
    if solver.tol is not None and not solver.tol > 0:
        problems.append("solver.tol must be positive")
    if problems:
        raise ValidationError(problems)
    return RunConfig(str(raw.get("name", "problem")), source, target, solver, exp, raw)


def load_config(path, overrides=()) -> RunConfig:
    return build_config(apply_overrides(load_raw(path), overrides))


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
