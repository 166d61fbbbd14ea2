"""Pydantic request/response models of the run service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class PresetInfo(BaseModel):
    name: str
    shape: str
    mode: str
    beta: float
    gamma: float
    t_final: float
    bounds: list[float]
    init_threshold: float


class ConfigPayload(BaseModel):
    """A run setup: INI text and/or a preset name, plus field overrides."""

    ini_text: Optional[str] = None
    preset: Optional[str] = None
    overrides: dict[str, Any] = Field(default_factory=dict)


class ResolvedConfig(BaseModel):
    preset: Optional[str] = None
    shape_kind: str
    mode: str
    y_floor: float
    expression: Optional[str] = None
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    schmidt: float
    c_star: float
    eps: float
    n: int
    m: int
    dx: float
    dy: float
    resolution_scale: float
    phi_floor: float
    cfl_phi_threshold: float
    dt: Optional[float] = None
    a_max: Optional[float] = None
    b_max: Optional[float] = None
    t_final: float
    snapshot_every: Optional[float] = None
    init_threshold: float
    output_dir: str
    formats: list[str]
    deterministic: bool


class RunCreated(BaseModel):
    run_id: str
    state: str


class DiagnosticsPoint(BaseModel):
    step: int
    time: float
    kinetic_energy: float
    total_mass: float
    min_n: float
    max_c: float


class RunStatus(BaseModel):
    run_id: str
    state: str                      # queued | running | done | failed
    step: int = 0
    time: float = 0.0
    t_final: float = 0.0
    progress: float = 0.0
    dt: Optional[float] = None
    output_dir: Optional[str] = None
    error: Optional[str] = None
    latest: Optional[DiagnosticsPoint] = None


class DiagnosticsSeries(BaseModel):
    run_id: str
    series: list[DiagnosticsPoint]


class PhiDumpResponse(BaseModel):
    csv: str


class RunReportModel(BaseModel):
    run_id: str
    final: DiagnosticsPoint
    steps: int
    dt: float
    wall_time: float
    solver_stats: dict[str, dict[str, float]]
    warnings: list[str]
    snapshots: int
    max_divergence: float
    output_dir: str
