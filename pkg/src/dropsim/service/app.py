"""FastAPI service wrapping the simulator: submit runs, poll status, fetch data."""

from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, HTTPException

from .. import config as config_mod
from .. import output
from ..geometry import build_diffuse_domain
from .jobs import JobRegistry
from .schemas import (ConfigPayload, DiagnosticsPoint, DiagnosticsSeries,
                      HealthResponse, PhiDumpResponse, PresetInfo,
                      ResolvedConfig, RunCreated, RunReportModel, RunStatus)


def _resolve_payload(payload: ConfigPayload):
    raw = {}
    if payload.ini_text:
        try:
            raw = config_mod._parse_sections(payload.ini_text)
        except config_mod.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
    if payload.preset:
        raw["preset"] = payload.preset
    try:
        return config_mod.resolve_config(raw, payload.overrides)
    except config_mod.ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _config_model(cfg) -> ResolvedConfig:
    data = asdict(cfg)
    data["formats"] = list(data["formats"])
    return ResolvedConfig(**data)


def _status_model(job) -> RunStatus:
    data = job.status_dict()
    latest = data.pop("latest")
    return RunStatus(**data, latest=DiagnosticsPoint(**latest) if latest else None)


def create_app() -> FastAPI:
    app = FastAPI(title="dropsim", version="0.1.0",
                  description="Bioconvection-in-a-drop simulation service")
    registry = JobRegistry()
    app.state.registry = registry

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse()

    @app.get("/presets", response_model=list[PresetInfo])
    def presets():
        return [PresetInfo(name=name, shape=p.shape_kind, mode=p.mode,
                           beta=p.beta, gamma=p.gamma, t_final=p.t_final,
                           bounds=list(p.bounds), init_threshold=p.init_threshold)
                for name, p in sorted(config_mod.PRESETS.items())]

    @app.post("/configs/resolve", response_model=ResolvedConfig)
    def resolve(payload: ConfigPayload):
        return _config_model(_resolve_payload(payload))

    @app.post("/phi-dump", response_model=PhiDumpResponse)
    def phi_dump(payload: ConfigPayload):
        cfg = _resolve_payload(payload)
        dd = build_diffuse_domain(cfg.grid(), cfg.shape(), cfg.eps, cfg.phi_floor)
        return PhiDumpResponse(csv=output.phi_csv_text(dd))

    @app.post("/runs", response_model=RunCreated)
    def submit(payload: ConfigPayload):
        cfg = _resolve_payload(payload)
        job = registry.submit(cfg)
        return RunCreated(run_id=job.run_id, state=job.state)

    @app.get("/runs", response_model=list[RunStatus])
    def list_runs():
        return [_status_model(job) for job in registry.list()]

    @app.get("/runs/{run_id}", response_model=RunStatus)
    def status(run_id: str):
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        return _status_model(job)

    @app.get("/runs/{run_id}/diagnostics", response_model=DiagnosticsSeries)
    def diagnostics(run_id: str):
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        if job.report is None:
            series = [job.latest] if job.latest else []
        else:
            series = job.report["series"]
        return DiagnosticsSeries(
            run_id=run_id, series=[DiagnosticsPoint(**d) for d in series])

    @app.get("/runs/{run_id}/report", response_model=RunReportModel)
    def report(run_id: str):
        job = registry.get(run_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        if job.state == "failed":
            raise HTTPException(status_code=500, detail=job.error or "run failed")
        if job.report is None:
            raise HTTPException(status_code=409, detail=f"run {run_id} not finished")
        rep = job.report
        return RunReportModel(run_id=run_id, final=DiagnosticsPoint(**rep["final"]),
                              steps=rep["steps"], dt=rep["dt"],
                              wall_time=rep["wall_time"],
                              solver_stats=rep["solver_stats"],
                              warnings=rep["warnings"], snapshots=rep["snapshots"],
                              max_divergence=rep["max_divergence"],
                              output_dir=job.cfg.output_dir)

    return app
