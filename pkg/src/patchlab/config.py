"""Scenario files (JSON, schema ``patchlab/1``), built-in scenarios and seeded random streams.

A scenario names a mode, a domain, a patch, a tangent system, grids and an
integrator. Unknown keys and out-of-range values raise
``ConfigurationError`` carrying the line of the offending key.
"""
from __future__ import annotations

import copy
import json
import math
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

SCHEMA = "patchlab/1"
MODES = ("2d", "free-space", "axisym", "3d-desk")


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named consumer of randomness."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass
class DomainSpec:
    kind: str = "disk"  # disk | ball | window | cylinder
    radius: float = 1.0
    rmax: float = 2.0
    zmax: float = 2.0


@dataclass
class GridSpec:
    extent: float = 2.5
    n: int = 256
    diagnostics_n: int = 128
    particles_n: int = 64
    nr: int = 48
    nz: int = 96


@dataclass
class PatchSpec:
    kind: str = "circle"  # circle | ellipse | sphere | ellipsoid | ring
    center: list = field(default_factory=lambda: [0.0, 0.0])
    semi_axes: list | None = None
    radius: float | None = None
    inner: object = 1.0
    outer: object = 0.0
    r: float = 0.5
    swirl: float | None = None
    xi: float = 1.0


@dataclass
class SystemSpec:
    s: float = 0.5
    blend_cells: float = 8.0


@dataclass
class IntegratorSpec:
    dt_factor: float = 0.5
    t_end: float | None = 1.0
    steps: int | None = None
    sample_every: int = 10
    markers: int = 1024
    tube: int = 256
    wall: int = 256
    lattice: bool = True


@dataclass
class ScenarioConfig:
    schema: str = SCHEMA
    name: str = "custom"
    mode: str = "2d"
    seed: int = 0
    domain: DomainSpec = field(default_factory=DomainSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    patch: PatchSpec = field(default_factory=PatchSpec)
    system: SystemSpec = field(default_factory=SystemSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False) + "\n"

    @property
    def dim(self) -> int:
        return 3 if self.mode == "3d-desk" else 2


_SECTIONS = {"domain": DomainSpec, "grid": GridSpec, "patch": PatchSpec, "system": SystemSpec,
             "integrator": IntegratorSpec}


def _line_of(text: str | None, path: tuple) -> int | None:
    """Line of the last key in ``path``, found by scanning for the keys in order."""
    if not text or not path:
        return None
    pos = 0
    for key in path:
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            return None
        pos = hit
    return text.count("\n", 0, pos) + 1


def _fill(cls, data, path: tuple, text):
    if not isinstance(data, dict):
        raise ConfigurationError(f"'{'.'.join(path)}' must be an object", _line_of(text, path))
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigurationError(f"unknown key '{'.'.join(path + (key,))}'", _line_of(text, path + (key,)))
    return cls(**copy.deepcopy(data))


def _check(cond: bool, msg: str, text, path: tuple):
    if not cond:
        raise ConfigurationError(msg, _line_of(text, path))


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pow2(n) -> bool:
    return isinstance(n, int) and n >= 8 and n & (n - 1) == 0


def _validate(cfg: ScenarioConfig, text) -> None:
    _check(cfg.schema == SCHEMA, f"schema must be '{SCHEMA}', got {cfg.schema!r}", text, ("schema",))
    _check(cfg.mode in MODES, f"mode must be one of {', '.join(MODES)}, got {cfg.mode!r}", text, ("mode",))
    _check(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed must be a non-negative integer", text, ("seed",))
    d, g, p, s, it = cfg.domain, cfg.grid, cfg.patch, cfg.system, cfg.integrator
    allowed = {"2d": ("disk",), "free-space": ("window",), "axisym": ("cylinder",), "3d-desk": ("ball",)}[cfg.mode]
    _check(d.kind in allowed, f"mode {cfg.mode} needs domain kind {allowed[0]!r}, got {d.kind!r}", text,
           ("domain", "kind"))
    for key in ("radius", "rmax", "zmax"):
        _check(_num(getattr(d, key)) and getattr(d, key) > 0, f"domain.{key} must be positive", text,
               ("domain", key))
    _check(0 < p.r < 1, f"patch.r must lie in (0, 1), got {p.r}", text, ("patch", "r"))
    _check(0 < s.s < 1, f"system.s must lie in (0, 1), got {s.s}", text, ("system", "s"))
    _check(_num(s.blend_cells) and s.blend_cells > 0, "system.blend_cells must be positive", text,
           ("system", "blend_cells"))
    _check(_num(it.dt_factor) and 0 < it.dt_factor <= 1, "integrator.dt_factor must lie in (0, 1]", text,
           ("integrator", "dt_factor"))
    _check(isinstance(it.sample_every, int) and it.sample_every >= 1, "integrator.sample_every must be >= 1", text,
           ("integrator", "sample_every"))
    if cfg.mode == "3d-desk":
        _check(isinstance(it.steps, int) and 1 <= it.steps <= 50, "3d-desk runs take 1 to 50 steps", text,
               ("integrator", "steps"))
    else:
        _check(_num(it.t_end) and it.t_end > 0, "integrator.t_end must be positive", text, ("integrator", "t_end"))
    if cfg.mode == "axisym":
        _check(p.kind == "ring", "axisym mode needs a patch of kind 'ring'", text, ("patch", "kind"))
        for key in ("nr", "nz"):
            _check(isinstance(getattr(g, key), int) and getattr(g, key) >= 8, f"grid.{key} must be an integer >= 8",
                   text, ("grid", key))
        _check(len(p.center) == 2 and _num(p.radius) and p.radius > 0, "a ring needs a 2-entry center and a radius",
               text, ("patch", "center"))
        return
    for key in ("n", "diagnostics_n", "particles_n"):
        _check(_pow2(getattr(g, key)), f"grid.{key} must be a power of two >= 8", text, ("grid", key))
    _check(_num(g.extent) and g.extent > 0, "grid.extent must be positive", text, ("grid", "extent"))
    kinds = ("sphere", "ellipsoid") if cfg.dim == 3 else ("circle", "ellipse")
    _check(p.kind in kinds, f"mode {cfg.mode} needs a patch of kind {' or '.join(kinds)}", text, ("patch", "kind"))
    _check(len(p.center) == cfg.dim, f"patch.center needs {cfg.dim} entries", text, ("patch", "center"))
    if p.kind in ("circle", "sphere"):
        _check(_num(p.radius) and p.radius > 0, "patch.radius must be positive", text, ("patch", "radius"))
    else:
        _check(isinstance(p.semi_axes, list) and len(p.semi_axes) == cfg.dim and all(_num(a) and a > 0 for a in p.semi_axes),
               f"patch.semi_axes needs {cfg.dim} positive entries", text, ("patch", "semi_axes"))
    if cfg.mode == "free-space":
        _check(p.outer in (0, 0.0), "free-space runs need zero exterior vorticity", text, ("patch", "outer"))
        _check(_num(p.inner), "free-space runs need a constant interior vorticity", text, ("patch", "inner"))


def parse_config(text: str) -> ScenarioConfig:
    if not text.strip():
        raise ConfigurationError("empty scenario file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return config_from_dict(data, text)


def config_from_dict(data: dict, text: str | None = None) -> ScenarioConfig:
    if not isinstance(data, dict) or not data:
        raise ConfigurationError("scenario must be a non-empty JSON object", 1 if text else None)
    top = {f.name for f in fields(ScenarioConfig)}
    for key in data:
        if key not in top:
            raise ConfigurationError(f"unknown key '{key}'", _line_of(text, (key,)))
    kw = {k: v for k, v in data.items() if k not in _SECTIONS}
    for name, cls in _SECTIONS.items():
        kw[name] = _fill(cls, data.get(name, {}), (name,), text)
    cfg = ScenarioConfig(**kw)
    _validate(cfg, text)
    return cfg


def load_config(spec: str) -> ScenarioConfig:
    """Read a scenario file, or a built-in scenario given as ``builtin:<name>``."""
    if spec.startswith("builtin:"):
        return builtin(spec.split(":", 1)[1])
    path = Path(spec)
    if not path.is_file():
        raise ConfigurationError(f"scenario file {spec!r} not found")
    return parse_config(path.read_text())


def _ellipse_period(a: float, b: float) -> float:
    return 2 * math.pi * (a + b) ** 2 / (a * b)


BUILTINS: dict[str, dict] = {
    "rankine-disk": {
        "mode": "2d",
        "domain": {"kind": "disk", "radius": 1.0},
        "grid": {"extent": 2.5, "n": 512, "diagnostics_n": 128, "particles_n": 64},
        "patch": {"kind": "circle", "center": [0.0, 0.0], "radius": 0.5, "inner": 1.0, "outer": 0.0},
        "integrator": {"dt_factor": 0.5, "t_end": 5.0, "sample_every": 20},
    },
    "kirchhoff-free": {
        "mode": "free-space",
        "domain": {"kind": "window", "radius": 0.6},
        "grid": {"extent": 2.0, "n": 512, "diagnostics_n": 128, "particles_n": 64},
        "patch": {"kind": "ellipse", "center": [0.0, 0.0], "semi_axes": [0.2, 0.1], "inner": 1.0, "outer": 0.0},
        "integrator": {"dt_factor": 1.0, "t_end": _ellipse_period(0.2, 0.1), "sample_every": 50, "wall": 0},
    },
    "perturbed-ellipse": {
        "mode": "2d",
        "domain": {"kind": "disk", "radius": 1.0},
        "grid": {"extent": 2.5, "n": 256, "diagnostics_n": 128, "particles_n": 64},
        "patch": {"kind": "ellipse", "center": [0.1, 0.05], "semi_axes": [0.45, 0.3], "inner": 1.0, "outer": 0.0},
        "integrator": {"dt_factor": 0.5, "t_end": 4.0, "sample_every": 8},
    },
    "axisym-ring": {
        "mode": "axisym",
        "domain": {"kind": "cylinder", "rmax": 2.0, "zmax": 2.0},
        "grid": {"nr": 48, "nz": 96},
        "patch": {"kind": "ring", "center": [1.0, -0.5], "radius": 0.3, "xi": 1.0},
        "integrator": {"dt_factor": 0.9, "t_end": 10.0, "sample_every": 2},
    },
    "desk-3d": {
        "mode": "3d-desk",
        "domain": {"kind": "ball", "radius": 1.0},
        "grid": {"extent": 4.0, "n": 32, "diagnostics_n": 32, "particles_n": 32},
        "patch": {"kind": "ellipsoid", "center": [0.1, 0.0, 0.05], "semi_axes": [0.4, 0.3, 0.35],
                  "swirl": 1.0, "outer": [0.0, 0.0, 1.0]},
        "system": {"blend_cells": 3.0},
        "integrator": {"dt_factor": 0.5, "t_end": None, "steps": 10, "sample_every": 1, "tube": 128},
    },
}


def builtin(name: str, **overrides) -> ScenarioConfig:
    """Built-in scenario with optional ``section={key: value}`` overrides."""
    if name not in BUILTINS:
        raise ConfigurationError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTINS)}")
    data = copy.deepcopy(BUILTINS[name])
    data["name"] = name
    for key, val in overrides.items():
        if isinstance(val, dict):
            data.setdefault(key, {}).update(val)
        else:
            data[key] = val
    return config_from_dict(data)
