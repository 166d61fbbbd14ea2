"""Command-line front end.

Works in two ways: standalone (the default; runs the simulation in-process)
or as a thin client of a running service instance when ``--server URL`` is
given (or the DROPSIM_SERVER environment variable is set). ``dropsim serve``
starts the service itself.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import config as config_mod
from . import output, runner
from .geometry import build_diffuse_domain


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dropsim",
        description="Bioconvection in sessile drops: diffuse-domain simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a simulation from an INI config")
    run_p.add_argument("--config", required=True, help="path to the INI config")
    run_p.add_argument("--out", help="output directory (overrides the config)")
    run_p.add_argument("--resolution-scale", type=float, dest="resolution_scale",
                       help="multiply dx, dy by this factor")
    run_p.add_argument("--t-final", type=float, dest="t_final",
                       help="final time (overrides preset/config)")
    run_p.add_argument("--deterministic", action="store_true", default=None,
                       help="force deterministic reduction order")
    run_p.add_argument("--server", default=os.environ.get("DROPSIM_SERVER"),
                       help="submit to a running service instead of in-process")

    sub.add_parser("presets", help="list the preset experiments").add_argument(
        "--server", default=os.environ.get("DROPSIM_SERVER"))

    phi_p = sub.add_parser("phi-dump", help="dump the diffuse-domain function as CSV")
    phi_p.add_argument("--config", required=True)
    phi_p.add_argument("--out", help="output CSV path (default <config>_phi.csv)")
    phi_p.add_argument("--server", default=os.environ.get("DROPSIM_SERVER"))

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8710)
    return parser


def _overrides(args):
    return {"output_dir": getattr(args, "out", None),
            "resolution_scale": getattr(args, "resolution_scale", None),
            "t_final": getattr(args, "t_final", None),
            "deterministic": getattr(args, "deterministic", None)}


def _print_report(report, out_dir):
    final = report.final
    print(f"done: {report.steps} steps, dt={report.dt:.6g}, "
          f"wall {report.wall_time:.1f}s")
    print(f"  final t={final.time:.6g}  KE={final.kinetic_energy:.6g}  "
          f"mass={final.total_mass:.6g}  min_n={final.min_n:.3g}  "
          f"max_c={final.max_c:.6g}")
    for w in report.warnings:
        print(f"  warning: {w}")
    print(f"  outputs in {out_dir}")


def _run_local(args) -> int:
    cfg = config_mod.load_config(args.config, _overrides(args))
    print(f"running {cfg.preset or cfg.shape_kind}: {cfg.n}x{cfg.m} cells, "
          f"t_final={cfg.t_final}, eps={cfg.eps:.4g}")

    def progress(step, n_steps, t):
        print(f"\r  step {step}/{n_steps}  t={t:.4f}", end="", flush=True)

    report = runner.execute_run(cfg, progress=progress)
    print()
    _print_report(report, cfg.output_dir)
    return 0


def _client(server):
    import httpx
    return httpx.Client(base_url=server.rstrip("/"), timeout=60.0)


def _run_remote(args) -> int:
    ini_text = Path(args.config).read_text(encoding="utf-8")
    overrides = {k: v for k, v in _overrides(args).items() if v is not None}
    with _client(args.server) as client:
        resp = client.post("/runs", json={"ini_text": ini_text,
                                          "overrides": overrides})
        if resp.status_code != 200:
            print(f"error: {resp.status_code} {resp.text}", file=sys.stderr)
            return 1
        run_id = resp.json()["run_id"]
        print(f"submitted run {run_id} to {args.server}")
        while True:
            status = client.get(f"/runs/{run_id}").json()
            print(f"\r  {status['state']}: step {status['step']}  "
                  f"t={status['time']:.4f}", end="", flush=True)
            if status["state"] in ("done", "failed"):
                print()
                break
            time.sleep(0.5)
        if status["state"] == "failed":
            print(f"run failed: {status['error']}", file=sys.stderr)
            return 1
        report = client.get(f"/runs/{run_id}/report").json()
        print(f"done: {report['steps']} steps, dt={report['dt']:.6g}, "
              f"wall {report['wall_time']:.1f}s")
        print(f"  outputs in {report['output_dir']} (on the server)")
    return 0


def _presets_local() -> int:
    print(f"{'name':10s} {'shape':10s} {'mode':10s} {'beta':>8s} {'gamma':>8s} "
          f"{'t_final':>8s}")
    for name, p in sorted(config_mod.PRESETS.items()):
        print(f"{name:10s} {p.shape_kind:10s} {p.mode:10s} {p.beta:8g} "
              f"{p.gamma:8g} {p.t_final:8g}")
    return 0


def _presets_remote(server) -> int:
    with _client(server) as client:
        for p in client.get("/presets").json():
            print(f"{p['name']:10s} {p['shape']:10s} {p['mode']:10s} "
                  f"{p['beta']:8g} {p['gamma']:8g} {p['t_final']:8g}")
    return 0


def _phi_dump_local(args) -> int:
    cfg = config_mod.load_config(args.config)
    dd = build_diffuse_domain(cfg.grid(), cfg.shape(), cfg.eps, cfg.phi_floor)
    out = args.out or (str(Path(args.config).with_suffix("")) + "_phi.csv")
    output.write_phi_csv(out, dd)
    print(f"wrote {out}")
    return 0


def _phi_dump_remote(args) -> int:
    ini_text = Path(args.config).read_text(encoding="utf-8")
    with _client(args.server) as client:
        resp = client.post("/phi-dump", json={"ini_text": ini_text})
        if resp.status_code != 200:
            print(f"error: {resp.status_code} {resp.text}", file=sys.stderr)
            return 1
        out = args.out or (str(Path(args.config).with_suffix("")) + "_phi.csv")
        Path(out).write_text(resp.json()["csv"], encoding="utf-8")
        print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run_remote(args) if args.server else _run_local(args)
        if args.command == "presets":
            return _presets_remote(args.server) if args.server else _presets_local()
        if args.command == "phi-dump":
            return _phi_dump_remote(args) if args.server else _phi_dump_local(args)
        if args.command == "serve":
            import uvicorn

            from .service import create_app
            uvicorn.run(create_app(), host=args.host, port=args.port)
            return 0
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (config_mod.ConfigError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
