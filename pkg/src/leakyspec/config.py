"""Run configuration: JSON document, schema validation, defaults and overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .boundary_ops import UnsupportedConfigurationError
from .bs_solver import BETA_MIN, InteractionSpec
from .geometry import ClosedCurve, SphereSurface

TASKS = ("bound_states", "schatten", "convergence", "verify")
BACKENDS = ("dense", "modes")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "interaction"],
    "properties": {
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["circle", "ellipse", "kite", "sphere"]},
                "R": _pos, "a": _num, "b": _num, "c": _num,
            },
        },
        "interaction": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "strength"],
            "properties": {
                "kind": {"enum": ["delta", "delta_prime"]},
                "strength": {"anyOf": [_num, {"type": "array", "items": _num, "minItems": 1}]},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 8},
                "l_max": {"type": "integer", "minimum": 1},
                "bracket": {"anyOf": [{"type": "null"},
                                      {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]},
                "tol": _num,
                "backend": {"anyOf": [{"type": "null"}, {"enum": list(BACKENDS)}]},
            },
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}, "minItems": 1, "uniqueItems": True},
        "volume": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {"anyOf": [{"type": "null"}, _pos]},
                "m": {"type": "integer", "minimum": 2},
                "tube": {"anyOf": [{"type": "null"}, {"type": "number", "minimum": 0}]},
            },
        },
        "schatten": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam": _num,
                "powers": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 3},
                           "minItems": 1, "uniqueItems": True},
            },
        },
        "output": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass
class SolverConfig:
    N: int = 256
    l_max: int = 64
    bracket: list | None = None
    tol: float = 1e-8
    backend: str | None = None


@dataclass
class VolumeConfig:
    L: float | None = None
    m: int = 44
    tube: float | None = None


@dataclass
class SchattenConfig:
    lam: float = -1.0
    powers: list = field(default_factory=lambda: [1])


@dataclass
class RunConfig:
    geometry: dict
    interaction: dict
    solver: SolverConfig = field(default_factory=SolverConfig)
    tasks: list = field(default_factory=lambda: ["bound_states"])
    volume: VolumeConfig = field(default_factory=VolumeConfig)
    schatten: SchattenConfig = field(default_factory=SchattenConfig)
    output: str = "out"
    seed: int = 0

    def make_geometry(self):
        g = self.geometry
        if g["kind"] == "sphere":
            return SphereSurface(float(g.get("R", 1.0)))
        if g["kind"] == "circle":
            return ClosedCurve.circle(g.get("R", 1.0))
        if g["kind"] == "ellipse":
            return ClosedCurve.ellipse(g["a"], g["b"])
        defaults = {"a": 0.65, "b": 1.5, "c": 1.0}
        return ClosedCurve.kite(**{k: g.get(k, v) for k, v in defaults.items()})

    def make_interaction(self) -> InteractionSpec:
        s = self.interaction["strength"]
        return InteractionSpec(self.interaction["kind"], s if isinstance(s, (int, float)) else list(s))


def _path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _semantic_checks(doc):
    g, it = doc["geometry"], doc["interaction"]
    if g["kind"] == "ellipse" and not all(key in g for key in ("a", "b")):
        raise ConfigError("geometry: ellipse needs both 'a' and 'b'")
    for key in ("a", "b"):
        if g["kind"] == "ellipse" and not g[key] > 0:
            raise ConfigError(f"geometry.{key}: ellipse semi-axis must be positive")
    if g["kind"] in ("circle", "ellipse", "kite") and "R" in g and g["kind"] != "circle":
        raise ConfigError(f"geometry.R: not a parameter of {g['kind']}")
    if g["kind"] in ("circle", "sphere") and any(k in g for k in ("a", "b", "c")):
        raise ConfigError(f"geometry: {g['kind']} takes only 'R'")
    if g["kind"] == "ellipse" and "c" in g:
        raise ConfigError("geometry.c: not a parameter of ellipse")

    sv = doc.get("solver", {})
    N = sv.get("N", 256)
    if N % 2:
        raise ConfigError(f"solver.N: N must be even (got {N})")
    if not sv.get("tol", 1e-8) > 0:
        raise ConfigError("solver.tol: tol must be positive")
    br = sv.get("bracket")
    if br is not None and not (br[0] < br[1] < 0):
        raise ConfigError("solver.bracket: need lam_min < lam_max < 0")

    s = it["strength"]
    if it["kind"] == "delta_prime":
        if isinstance(s, list):
            raise ConfigError("interaction.strength: delta_prime needs a constant beta")
        if abs(s) < BETA_MIN:
            raise ConfigError(f"interaction.strength: |beta| must be at least {BETA_MIN}")
        if g["kind"] in ("ellipse", "kite"):
            raise ConfigError(f"interaction: delta_prime on {g['kind']} is an unsupported "
                              "configuration (separable backends only)")
    elif isinstance(s, list):
        if g["kind"] == "sphere" or sv.get("backend") == "modes":
            raise ConfigError("interaction.strength: sampled alpha needs the dense backend")
        if len(s) != N:
            raise ConfigError(f"interaction.strength: sampled alpha needs N={N} values, got {len(s)}")
    if sv.get("backend") == "modes" and g["kind"] in ("ellipse", "kite"):
        raise ConfigError(f"solver.backend: mode backend is unavailable on {g['kind']}")
    if sv.get("backend") == "dense" and g["kind"] == "sphere":
        raise ConfigError("solver.backend: sphere supports the mode backend only")
    sc = doc.get("schatten", {})
    if not sc.get("lam", -1.0) < 0:
        raise ConfigError("schatten.lam: lambda must be negative")


def validate(doc) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"{_path(err)}: {err.message}") from None
    _semantic_checks(doc)


def from_dict(doc) -> RunConfig:
    """Validate a config document and apply defaults."""
    validate(doc)
    doc = copy.deepcopy(doc)
    return RunConfig(
        geometry=doc["geometry"],
        interaction=doc["interaction"],
        solver=SolverConfig(**doc.get("solver", {})),
        tasks=doc.get("tasks", ["bound_states"]),
        volume=VolumeConfig(**doc.get("volume", {})),
        schatten=SchattenConfig(**doc.get("schatten", {})),
        output=doc.get("output", "out"),
        seed=doc.get("seed", 0),
    )


def to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def emit(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=1, sort_keys=True) + "\n"


def apply_overrides(doc, geometry=None, radius=None, alpha=None, beta=None, grid_n=None,
                    tasks=None):
    """Flag overrides on top of a (possibly empty) document."""
    doc = copy.deepcopy(doc)
    if alpha is not None and beta is not None:
        raise ConfigError("--alpha and --beta are mutually exclusive")
    flags = (geometry, radius, alpha, beta, grid_n)
    if "geometry" not in doc and any(f is not None for f in flags):
        doc["geometry"] = {"kind": "circle", "R": 1.0}
    if geometry is not None and geometry != doc["geometry"].get("kind"):
        doc["geometry"] = {"kind": geometry}
    if radius is not None:
        doc.setdefault("geometry", {"kind": "circle"})["R"] = radius
    if alpha is not None:
        doc["interaction"] = {"kind": "delta", "strength": alpha}
    if beta is not None:
        doc["interaction"] = {"kind": "delta_prime", "strength": beta}
    if grid_n is not None:
        doc.setdefault("solver", {})["N"] = grid_n
    if tasks:
        doc["tasks"] = list(tasks)
    return doc


def parse_config(path=None, **overrides) -> RunConfig:
    """Read a JSON config (optional), apply flag overrides, validate."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
    doc = apply_overrides(doc, **overrides)
    try:
        return from_dict(doc)
    except UnsupportedConfigurationError as err:
        raise ConfigError(str(err)) from None
