"""Run configuration: INI parsing, preset experiments, and simulation assembly.

Presets bundle the eight reference experiments: droplet shape, embedding
rectangle, dimensionless parameters, initial data, and final time. The
default profile is desk-scale: resolution coarsened 4x and the final time
capped at 0.5 unless the user overrides either. The interface width follows
the mesh coarsening so the diffuse band stays resolved (one cell wide at the
reference resolution); an explicit eps always wins.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import sim as sim_mod
from .core import Grid, Params, ScalarField, make_grid
from .geometry import ShapeSpec, build_diffuse_domain

DESK_SCALE = 4.0
DESK_T_CAP = 0.5


class ConfigError(ValueError):
    """Bad or incomplete run configuration; the message names the field."""


@dataclass(frozen=True)
class PresetSpec:
    shape_kind: str
    mode: str
    y_floor: float
    bounds: tuple
    beta: float
    gamma: float
    t_final: float
    init_threshold: float   # n0 = 1 above y = threshold - 0.01 sin(pi (x - 1.5))


PRESETS = {
    "example1": PresetSpec("example1", "sessile", 0.0, (-5.0, 5.0, 0.0, 1.5),
                           10.0, 1000.0, 6.0, 0.499),
    "example2": PresetSpec("example2", "sessile", 0.0, (-5.0, 5.0, 0.0, 1.5),
                           10.0, 1000.0, 6.0, 0.499),
    "example3": PresetSpec("example3", "sessile", 0.0, (-7.5, 7.5, 0.0, 1.5),
                           10.0, 1000.0, 2.0, 0.499),
    "example4": PresetSpec("example4", "sessile", 0.0, (-7.5, 7.5, 0.0, 1.5),
                           10.0, 1000.0, 2.0, 0.499),
    "example5": PresetSpec("example1", "sessile", 0.0, (-5.0, 5.0, 0.0, 1.5),
                           100.0, 10000.0, 0.5, 0.499),
    "example6": PresetSpec("example2", "sessile", 0.0, (-5.0, 5.0, 0.0, 1.5),
                           100.0, 10000.0, 0.5, 0.499),
    "example7": PresetSpec("example78", "surrounded", 0.1, (-5.0, 5.0, 0.0, 1.5),
                           20.0, 2000.0, 5.0, 0.599),
    "example8": PresetSpec("example78", "surrounded", 0.1, (-5.0, 5.0, 0.0, 1.5),
                           40.0, 4000.0, 5.0, 0.599),
}

REFERENCE_DX = 0.01   # production mesh spacing of the reference experiments


@dataclass
class RunConfig:
    """Fully resolved simulation setup."""

    preset: str | None = None
    shape_kind: str = "example1"
    mode: str = "sessile"
    y_floor: float = 0.0
    expression: str | None = None
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = 0.0
    y_max: float = 1.5
    alpha: float = 10.0
    beta: float = 10.0
    gamma: float = 1000.0
    delta: float = 5.0
    schmidt: float = 500.0
    c_star: float = 0.3
    eps: float = 0.01
    n: int = 0
    m: int = 0
    dx: float = 0.0
    dy: float = 0.0
    resolution_scale: float = 1.0
    phi_floor: float = 1e-9
    cfl_phi_threshold: float = 1e-3
    dt: float | None = None
    a_max: float | None = None
    b_max: float | None = None
    t_final: float = 0.5
    snapshot_every: float | None = None
    init_threshold: float = 0.499
    output_dir: str = "out"
    formats: tuple = ("csv", "binary")
    deterministic: bool = False

    def shape(self) -> ShapeSpec:
        return ShapeSpec(kind=self.shape_kind, mode=self.mode,
                         y_floor=self.y_floor, expression=self.expression)

    def params(self) -> Params:
        return Params(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                      delta=self.delta, schmidt=self.schmidt,
                      c_star=self.c_star, eps=self.eps)

    def grid(self) -> Grid:
        return make_grid((self.x_min, self.x_max, self.y_min, self.y_max),
                         self.n, self.m)


def config_hash(cfg: RunConfig) -> str:
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


_SECTION_FIELDS = {
    "domain": ("preset", "shape", "mode", "y_floor", "expression",
               "x_min", "x_max", "y_min", "y_max", "init_threshold"),
    "params": ("alpha", "beta", "gamma", "delta", "schmidt", "c_star", "eps"),
    "mesh": ("dx", "dy", "n", "m", "resolution_scale", "phi_floor"),
    "time": ("t_final", "dt", "cfl_phi_threshold", "a_max", "b_max"),
    "output": ("output_dir", "snapshot_every", "formats", "deterministic"),
}

_FLOAT_KEYS = {"y_floor", "x_min", "x_max", "y_min", "y_max", "alpha", "beta",
               "gamma", "delta", "schmidt", "c_star", "eps", "dx", "dy",
               "resolution_scale", "phi_floor", "t_final", "dt",
               "cfl_phi_threshold", "a_max", "b_max", "snapshot_every",
               "init_threshold"}
_INT_KEYS = {"n", "m"}
_BOOL_KEYS = {"deterministic"}


def _parse_sections(text: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    raw = {}
    for section in parser.sections():
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _SECTION_FIELDS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            raw[key] = value
    return raw


def _convert(key, value):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _BOOL_KEYS:
            return value.strip().lower() in ("1", "true", "yes", "on")
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: cannot parse {value!r}") from exc
    return value.strip()


def resolve_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Turn raw key/value strings plus overrides into a validated RunConfig."""
    values = {k: _convert(k, v) if isinstance(v, str) else v for k, v in raw.items()}
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    preset_name = values.get("preset")
    cfg = RunConfig()
    if preset_name:
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; "
                              f"choose from {sorted(PRESETS)}")
        p = PRESETS[preset_name]
        cfg.preset = preset_name
        cfg.shape_kind, cfg.mode, cfg.y_floor = p.shape_kind, p.mode, p.y_floor
        cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max = p.bounds
        cfg.beta, cfg.gamma = p.beta, p.gamma
        cfg.init_threshold = p.init_threshold
        cfg.dx = cfg.dy = REFERENCE_DX
        if "resolution_scale" not in values:
            values["resolution_scale"] = DESK_SCALE
        if "t_final" not in values:
            values["t_final"] = min(p.t_final, DESK_T_CAP)
    else:
        required = ("shape", "t_final")
        missing = [k for k in required if k not in values]
        if missing:
            raise ConfigError(f"missing required field(s) without a preset: {missing}")

    eps_explicit = "eps" in values
    mesh_explicit = "dx" in values or "n" in values
    for key, value in values.items():
        if key == "preset":
            continue
        if key == "shape":
            cfg.shape_kind = value
        elif key == "formats":
            parts = tuple(s.strip() for s in str(value).split(",") if s.strip())
            bad = [s for s in parts if s not in ("csv", "binary")]
            if bad:
                raise ConfigError(f"field 'formats': unknown format(s) {bad}")
            cfg.formats = parts
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown field {key!r}")

    scale = cfg.resolution_scale
    if scale <= 0:
        raise ConfigError("field 'resolution_scale': must be positive")
    if not mesh_explicit and cfg.dx > 0:
        cfg.dx *= scale
        cfg.dy *= scale
        if not eps_explicit:
            # keep the interface band resolved relative to the coarsened mesh
            cfg.eps *= scale
    if cfg.n <= 0 or cfg.m <= 0:
        if cfg.dx <= 0 or cfg.dy <= 0:
            raise ConfigError("mesh needs either dx/dy or n/m")
        cfg.n = int(round((cfg.x_max - cfg.x_min) / cfg.dx))
        cfg.m = int(round((cfg.y_max - cfg.y_min) / cfg.dy))
    cfg.dx = (cfg.x_max - cfg.x_min) / cfg.n
    cfg.dy = (cfg.y_max - cfg.y_min) / cfg.m

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.t_final is None or cfg.t_final < 0:
        raise ConfigError("field 't_final': must be >= 0")
    if cfg.n < 3 or cfg.m < 3:
        raise ConfigError(f"field 'n/m': mesh too coarse ({cfg.n}x{cfg.m})")
    cfg.params()           # parameter invariants
    cfg.shape()            # shape invariants
    if not (0.0 < cfg.phi_floor < 0.5):
        raise ConfigError("field 'phi_floor': must lie in (0, 0.5)")
    if cfg.snapshot_every is not None and cfg.snapshot_every <= 0:
        raise ConfigError("field 'snapshot_every': must be positive")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse and resolve an INI config file."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read(), overrides)


def loads_config(text: str, overrides: dict | None = None) -> RunConfig:
    return resolve_config(_parse_sections(text), overrides)


def to_ini(cfg: RunConfig) -> str:
    """Serialize a resolved config; re-parsing yields an identical config."""
    parser = configparser.ConfigParser()
    parser["domain"] = {
        "shape": cfg.shape_kind, "mode": cfg.mode, "y_floor": repr(cfg.y_floor),
        "x_min": repr(cfg.x_min), "x_max": repr(cfg.x_max),
        "y_min": repr(cfg.y_min), "y_max": repr(cfg.y_max),
        "init_threshold": repr(cfg.init_threshold),
    }
    if cfg.expression:
        parser["domain"]["expression"] = cfg.expression
    parser["params"] = {k: repr(getattr(cfg, k))
                        for k in ("alpha", "beta", "gamma", "delta", "schmidt",
                                  "c_star", "eps")}
    parser["mesh"] = {"n": str(cfg.n), "m": str(cfg.m),
                      "resolution_scale": "1.0", "phi_floor": repr(cfg.phi_floor)}
    parser["time"] = {"t_final": repr(cfg.t_final),
                      "cfl_phi_threshold": repr(cfg.cfl_phi_threshold)}
    if cfg.dt is not None:
        parser["time"]["dt"] = repr(cfg.dt)
    if cfg.a_max is not None:
        parser["time"]["a_max"] = repr(cfg.a_max)
    if cfg.b_max is not None:
        parser["time"]["b_max"] = repr(cfg.b_max)
    parser["output"] = {"output_dir": cfg.output_dir,
                        "formats": ",".join(cfg.formats),
                        "deterministic": str(cfg.deterministic).lower()}
    if cfg.snapshot_every is not None:
        parser["output"]["snapshot_every"] = repr(cfg.snapshot_every)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def initial_cell_density(cfg_or_threshold, grid: Grid) -> ScalarField:
    """Layered initial bacteria density: 1 above the perturbed line, 0.5 below."""
    threshold = (cfg_or_threshold if isinstance(cfg_or_threshold, float)
                 else cfg_or_threshold.init_threshold)
    def n0(x, y):
        line = threshold - 0.01 * np.sin(np.pi * (x - 1.5))
        return np.where(y > line, 1.0, 0.5)
    return ScalarField.from_function(grid, n0)


def preset_initial_data(preset: str, grid: Grid, dd):
    """Initial fields of a preset: m0 = phi*n0, saturated oxygen, fluid at rest."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    n0 = initial_cell_density(PRESETS[preset].init_threshold, grid)
    m0 = ScalarField(grid, dd.phi_c.values * n0.values)
    c0 = ScalarField.full(grid, 1.0)
    u0 = ScalarField.zeros(grid)
    v0 = ScalarField.zeros(grid)
    p0 = ScalarField.zeros(grid)
    return m0, c0, u0, v0, p0


def build_sim(cfg: RunConfig) -> sim_mod.SimState:
    """Geometry, diffuse domain, initial data, CFL step: a ready SimState."""
    grid = cfg.grid()
    dd = build_diffuse_domain(grid, cfg.shape(), cfg.eps, cfg.phi_floor)
    n0 = initial_cell_density(cfg.init_threshold, grid)
    m0 = ScalarField(grid, dd.phi_c.values * n0.values)
    return sim_mod.make_sim(grid, dd, cfg.params(), cfg.mode, m0,
                            dt=cfg.dt, a_max=cfg.a_max, b_max=cfg.b_max,
                            cfl_phi_threshold=cfg.cfl_phi_threshold)
