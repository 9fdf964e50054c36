"""Experiment configuration: JSON schema validation and object builders."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .systems import (
    GOLDEN,
    AutomorphismPowers,
    Ball,
    Box,
    Doubling,
    FullSpace,
    IntegerStep,
    Product,
    Rotation,
    SkewProduct,
    SkewShift,
    System,
    Target,
    ToralAuto,
    TranslationFlow,
    TrigPoly,
    rectangle,
)

SCHEMA_VERSION = 1

CONSTANTS = {
    "golden": GOLDEN,
    "sqrt2-1": math.sqrt(2.0) - 1.0,
    "sqrt3-1": math.sqrt(3.0) - 1.0,
}


class ConfigError(ValueError):
    """Config failed schema validation or describes an impossible object."""


def load_schema() -> dict:
    text = resources.files("pltlab").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def canned_names() -> list[str]:
    root = resources.files("pltlab").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def canned_config(name: str) -> dict:
    path = resources.files("pltlab").joinpath(f"configs/{name}.json")
    if not path.is_file():
        raise ConfigError(f"no canned config named {name!r}; available: {', '.join(canned_names())}")
    return json.loads(path.read_text())


def _number(v) -> float:
    return CONSTANTS[v] if isinstance(v, str) else float(v)


def _vector(v) -> tuple:
    if isinstance(v, list):
        return tuple(_number(x) for x in v)
    return (_number(v),)


def build_tau(spec: dict):
    if spec["type"] == "step":
        return IntegerStep(tuple(spec["breakpoints"]), tuple(spec["values"]), spec.get("coord", 0),
                           spec.get("allow_drift", False))
    return TrigPoly(tuple(spec.get("cos", ())), tuple(spec.get("sin", ())), spec.get("coord", 0))


def build_system(spec: dict) -> System:
    kind = spec["type"]
    if kind == "rotation":
        return Rotation(_vector(spec["alpha"]))
    if kind == "skew_shift":
        return SkewShift(_vector(spec["alpha"])[0])
    if kind == "toral_auto":
        return ToralAuto(spec["matrix"])
    if kind == "doubling":
        return Doubling()
    if kind == "product":
        return Product(build_system(spec["fiber"]), build_system(spec["base"]))
    fam = spec["family"]
    family = TranslationFlow(_vector(fam["beta"])) if fam["type"] == "translation" else AutomorphismPowers(fam["matrix"])
    return SkewProduct(family, build_tau(spec["tau"]), build_system(spec["base"]))


def build_simple_target(spec: dict) -> Target:
    shape = spec["shape"]
    if shape == "full":
        return FullSpace(int(spec["dim"]))
    if shape == "ball":
        return Ball(tuple(spec["center"]), float(spec["radius"]))
    return Box(tuple(spec["center"]), tuple(spec["halfwidths"]))


def family_target(family: dict, radius: float) -> Target:
    """Target of the radius grid: a ball/box at the center, times the base set if one is given."""
    center = tuple(family["center"])
    a = Ball(center, radius) if family["shape"] == "ball" else Box(center, (radius,) * len(center))
    if "base" in family:
        return rectangle(a, build_simple_target(family["base"]))
    return a


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    kind: str
    system: System
    samples: int
    seed: int
    shards: int = 1
    flavor: str = "plain"
    count: int = 1
    cap_factor: float = 100.0
    targets: tuple = ()
    radii: tuple = ()
    out: str | None = None
    params: dict = field(default_factory=dict, compare=False)
    checkers: tuple = ()
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def to_json(self) -> dict:
        return copy.deepcopy(self.raw)


def parse_config(data: Any) -> ExperimentConfig:
    """Validate a decoded JSON document and build every object it describes."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        system = build_system(data["system"])
        fam = data.get("target")
        radii = tuple(float(r) for r in fam["radii"]) if fam else ()
        targets = tuple(family_target(fam, r) for r in radii) if fam else ()
        for t in targets:
            if t.dim not in (system.dim, system.fiber_dim):
                raise ConfigError(f"target dimension {t.dim} does not fit a {system.dim}-dimensional system")
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if data["kind"] != "conditions" and not targets:
        raise ConfigError(f"kind {data['kind']!r} needs a target family")
    return ExperimentConfig(
        experiment_id=data["experiment_id"],
        kind=data["kind"],
        system=system,
        samples=int(data["samples"]),
        seed=int(data["seed"]),
        shards=int(data.get("shards", 1)),
        flavor=data.get("flavor", "plain"),
        count=int(data.get("count", 1)),
        cap_factor=float(data.get("cap_factor", 100.0)),
        targets=targets,
        radii=radii,
        out=data.get("out"),
        params=dict(data.get("params", {})),
        checkers=tuple(data.get("checkers", ())),
        raw=copy.deepcopy(data),
    )


def load_config(source) -> ExperimentConfig:
    """From a path, a canned config name, or an already decoded dict."""
    if isinstance(source, dict):
        return parse_config(source)
    path = Path(source)
    if path.suffix != ".json" and not path.exists():
        return parse_config(canned_config(str(source)))
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(data)
