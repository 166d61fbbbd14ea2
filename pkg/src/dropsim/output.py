"""Snapshot and diagnostics writers: CSV, raw binary, and JSON manifests.

CSV files carry an ``x,y,value`` header and enumerate interior cells with the
x index fastest. Binary files hold a 16-byte header of two little-endian
64-bit unsigned integers (n, m) followed by n*m little-endian float64 values
in the same cell order. Each snapshot gets a JSON manifest listing its files,
step, time, grid metadata, and the config hash.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid

SNAPSHOT_FIELDS = ("mbar", "n", "c", "u", "v", "p")


@dataclass
class Snapshot:
    """Dense interior fields of one time level plus grid metadata."""

    step: int
    time: float
    fields: dict          # name -> (n, m) array
    grid: Grid
    config_hash: str = ""

    @classmethod
    def from_sim(cls, sim, config_hash=""):
        dd = sim.dd
        n_masked = np.where(dd.phi_c.interior >= 0.5,
                            sim.m.interior / dd.phi_c.interior, np.nan)
        fields = {
            "mbar": sim.m.interior.copy(),
            "n": n_masked,
            "c": sim.flow.c.interior.copy(),
            "u": sim.flow.u.interior.copy(),
            "v": sim.flow.v.interior.copy(),
            "p": sim.flow.p.interior.copy(),
        }
        return cls(step=sim.step, time=sim.time, fields=fields, grid=sim.grid,
                   config_hash=config_hash)


def _cell_order(values):
    # x index fastest: iterate rows (fixed y), then columns
    return np.asarray(values).ravel(order="F")


def write_field_csv(path, values, grid: Grid):
    x = grid.center_x()[1:-1]
    y = grid.center_y()[1:-1]
    flat = _cell_order(values)
    xs = np.tile(x, grid.m)
    ys = np.repeat(y, grid.n)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,value\n")
        for xi, yi, vi in zip(xs, ys, flat):
            fh.write(f"{xi!r},{yi!r},{vi!r}\n")


def write_field_binary(path, values, grid: Grid):
    flat = _cell_order(values).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", grid.n, grid.m))
        fh.write(flat.tobytes())


def read_field_binary(path):
    with open(path, "rb") as fh:
        n, m = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * m:
        raise IOError(f"{path}: expected {n * m} values, found {data.size}")
    return data.reshape((m, n)).T   # undo x-fastest flattening


def write_snapshot(snap: Snapshot, out_dir, formats=("csv", "binary")) -> dict:
    """Write one file per field plus a JSON manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"snapshot_{snap.step:08d}"
    files = {}
    try:
        for name, values in snap.fields.items():
            entry = {}
            if "csv" in formats:
                path = out / f"{stem}_{name}.csv"
                write_field_csv(path, values, snap.grid)
                entry["csv"] = path.name
            if "binary" in formats:
                path = out / f"{stem}_{name}.bin"
                write_field_binary(path, values, snap.grid)
                entry["binary"] = path.name
            files[name] = entry
        manifest = {
            "step": snap.step,
            "time": snap.time,
            "config_hash": snap.config_hash,
            "grid": {"n": snap.grid.n, "m": snap.grid.m,
                     "x_min": snap.grid.x_min, "x_max": snap.grid.x_max,
                     "y_min": snap.grid.y_min, "y_max": snap.grid.y_max,
                     "dx": snap.grid.dx, "dy": snap.grid.dy},
            "files": files,
        }
        manifest_path = out / f"{stem}.json"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1)
    except OSError as exc:
        raise IOError(f"snapshot write failed under {out}: {exc}") from exc
    return manifest


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_phi_csv(path, dd):
    """Debug dump of the diffuse-domain function at interior cell centers."""
    write_field_csv(path, dd.phi_c.interior, dd.grid)


def phi_csv_text(dd) -> str:
    grid = dd.grid
    x = grid.center_x()[1:-1]
    y = grid.center_y()[1:-1]
    flat = _cell_order(dd.phi_c.interior)
    lines = ["x,y,value"]
    xs = np.tile(x, grid.m)
    ys = np.repeat(y, grid.n)
    lines.extend(f"{xi!r},{yi!r},{vi!r}" for xi, yi, vi in zip(xs, ys, flat))
    return "\n".join(lines) + "\n"


def write_diagnostics_csv(path, series):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,time,kinetic_energy,total_mass,min_n,max_c\n")
        for d in series:
            fh.write(f"{d.step},{d.time!r},{d.kinetic_energy!r},"
                     f"{d.total_mass!r},{d.min_n!r},{d.max_c!r}\n")


def write_report_json(path, report, extra=None):
    payload = report.as_dict()
    payload.pop("series", None)    # the series lives in diagnostics.csv
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
