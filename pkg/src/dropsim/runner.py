"""Shared run execution: build the simulation from a config, write outputs."""

from __future__ import annotations

from pathlib import Path

from . import config as config_mod
from . import output, sim as sim_mod


def execute_run(cfg, progress=None, diag_every: int = 1):
    """Run a resolved config to completion, writing snapshots and reports.

    Returns the run report; all files land under ``cfg.output_dir``.
    """
    state = config_mod.build_sim(cfg)
    chash = config_mod.config_hash(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(config_mod.to_ini(cfg), encoding="utf-8")

    snap_every = cfg.snapshot_every
    if snap_every is None and cfg.t_final > 0:
        snap_every = cfg.t_final / 10.0

    def on_snapshot(s):
        output.write_snapshot(output.Snapshot.from_sim(s, chash), out_dir, cfg.formats)

    report = sim_mod.run(state, cfg.t_final, snap_every, on_snapshot,
                         progress=progress, diag_every=diag_every)
    output.write_diagnostics_csv(out_dir / "diagnostics.csv", report.series)
    output.write_report_json(out_dir / "report.json", report,
                             extra={"config_hash": chash,
                                    "output_dir": str(out_dir)})
    return report
