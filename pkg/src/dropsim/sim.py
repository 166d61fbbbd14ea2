"""Time-loop orchestration, diagnostics, and snapshot scheduling.

One step: refill all ghosts, advance the cell density (forward Euler on the
first two levels, three-step SSP after), recover n = m/phi, then run the
projection fluid step and the implicit oxygen solve (backward-Euler variants
on the very first step), and rotate the histories. The time step is fixed at
construction from the positivity CFL bound and never adapted; if observed
face speeds exceed the a-priori bounds the run warns and continues.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import advect, boundary
from .core import Grid, Params, ScalarField
from .flow import FlowSolver, FlowState, discrete_divergence
from .geometry import DiffuseDomain
from .linsolve import SolveOptions

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """A step failed; the message carries the step index."""


@dataclass
class Diagnostics:
    step: int
    time: float
    kinetic_energy: float
    total_mass: float
    min_n: float
    max_c: float

    def as_dict(self):
        return {"step": self.step, "time": self.time,
                "kinetic_energy": self.kinetic_energy,
                "total_mass": self.total_mass,
                "min_n": self.min_n, "max_c": self.max_c}


def fill_ghosts_m(m, c, dd, params, mode="sessile"):
    return boundary.fill_ghosts_m(m, c, dd, params, mode)


def fill_ghosts_flow(u, v, c, mode="sessile"):
    boundary.fill_ghosts_velocity(u, v, mode)
    boundary.fill_ghosts_oxygen(c, mode)
    return u, v, c


def kinetic_energy(u: ScalarField, v: ScalarField, dd: DiffuseDomain,
                   grid: Grid) -> float:
    """phi-weighted discrete L2 norm of the velocity over the drop."""
    phi = dd.phi_c.interior
    total = float((phi * (u.interior**2 + v.interior**2)).sum())
    return math.sqrt(total * grid.dx * grid.dy)


@dataclass
class SimState:
    grid: Grid
    dd: DiffuseDomain
    params: Params
    mode: str
    dt: float
    m: ScalarField
    m_prev: ScalarField
    m_prev2: ScalarField
    flow: FlowState
    solver: FlowSolver
    a_max: float
    b_max: float
    step: int = 0
    last_fluxes: advect.FluxSet | None = None
    warnings: list = field(default_factory=list)
    _speed_warned: bool = field(default=False, repr=False)

    @property
    def time(self) -> float:
        return self.step * self.dt

    def n_field(self) -> ScalarField:
        """Cell density recovered from the clamped diffuse-domain function."""
        return ScalarField(self.grid, self.m.values / self.dd.phi_c.values)

    def diagnostics(self) -> Diagnostics:
        ke = kinetic_energy(self.flow.u, self.flow.v, self.dd, self.grid)
        mass = float(self.m.interior.sum()) * self.grid.cell_area
        n_int = self.m.interior / self.dd.phi_c.interior
        return Diagnostics(step=self.step, time=self.time, kinetic_energy=ke,
                           total_mass=mass, min_n=float(n_int.min()),
                           max_c=float(self.flow.c.interior.max()))


def initial_speed_bounds(m0, c0, u0, v0, dd, params, safety=4.0, floor=1.0):
    """A-priori speed bounds: initial max face speeds times a safety factor.

    The bound must be positive even for fluid at rest, so a unit floor backs
    the scaled initial speeds; both are configuration-overridable.
    """
    a, b = advect.local_speeds(c0, u0, v0, params)
    a_max = max(safety * float(np.abs(a).max()), floor)
    b_max = max(safety * float(np.abs(b).max()), floor)
    return a_max, b_max


def make_sim(grid, dd, params, mode, m0, c0=None, u0=None, v0=None, p0=None,
             dt=None, a_max=None, b_max=None, cfl_phi_threshold=1e-3,
             solve_options=None) -> SimState:
    """Assemble a ready-to-advance state; dt is fixed here once and for all."""
    flow_state = FlowState.resting(grid, c0=c0, u0=u0, v0=v0, p0=p0, mode=mode)
    m = m0.copy()
    boundary.fill_ghosts_m(m, flow_state.c, dd, params, mode)
    if a_max is None or b_max is None:
        a_def, b_def = initial_speed_bounds(m, flow_state.c, flow_state.u,
                                            flow_state.v, dd, params)
        a_max = a_def if a_max is None else a_max
        b_max = b_def if b_max is None else b_max
    if dt is None:
        dt = advect.cfl_dt(dd, a_max, b_max, grid, cfl_phi_threshold)
    solver = FlowSolver(dd, params, dt, mode, solve_options or SolveOptions())
    return SimState(grid=grid, dd=dd, params=params, mode=mode, dt=dt,
                    m=m, m_prev=m.copy(), m_prev2=m.copy(),
                    flow=flow_state, solver=solver, a_max=a_max, b_max=b_max)


def advance(sim: SimState) -> SimState:
    """One full time step; sub-errors surface with the step index attached."""
    try:
        return _advance(sim)
    except Exception as exc:
        raise SimulationError(f"step {sim.step} (t={sim.time:.6g}) failed: {exc}") from exc


def _advance(sim: SimState) -> SimState:
    boundary.fill_ghosts_m(sim.m, sim.flow.c, sim.dd, sim.params, sim.mode)
    boundary.fill_ghosts_velocity(sim.flow.u, sim.flow.v, sim.mode)
    boundary.fill_ghosts_oxygen(sim.flow.c, sim.mode)

    flux = advect.compute_fluxes(sim.m, sim.flow.c, sim.flow.u, sim.flow.v,
                                 sim.dd, sim.params)
    sim.last_fluxes = flux
    a_obs, b_obs = flux.max_speeds()
    if (a_obs > sim.a_max or b_obs > sim.b_max) and not sim._speed_warned:
        msg = (f"step {sim.step}: observed speeds ({a_obs:.3g}, {b_obs:.3g}) exceed "
               f"the a-priori bounds ({sim.a_max:.3g}, {sim.b_max:.3g}); "
               "the fixed dt may violate the positivity CFL bound")
        log.warning(msg)
        sim.warnings.append(msg)
        sim._speed_warned = True

    rhs = advect.rhs_divergence(flux, sim.grid)
    if sim.step < 2:
        m_new = advect.euler_step(sim.m, rhs, sim.dt)
    else:
        m_new = advect.ssp_step(sim.m, sim.m_prev2, rhs, sim.dt)

    n_new = ScalarField(sim.grid, m_new.values / sim.dd.phi_c.values)
    sim.flow = sim.solver.step(sim.flow, n_new, first=(sim.step == 0))

    sim.m_prev2 = sim.m_prev
    sim.m_prev = sim.m
    sim.m = m_new
    sim.step += 1
    return sim


@dataclass
class RunReport:
    final: Diagnostics
    series: list
    steps: int
    dt: float
    wall_time: float
    solver_stats: dict
    warnings: list
    snapshots: int
    max_divergence: float

    def as_dict(self):
        return {"final": self.final.as_dict(),
                "series": [d.as_dict() for d in self.series],
                "steps": self.steps, "dt": self.dt,
                "wall_time": self.wall_time,
                "solver_stats": self.solver_stats,
                "warnings": self.warnings,
                "snapshots": self.snapshots,
                "max_divergence": self.max_divergence}


def run(sim: SimState, t_final: float, snapshot_every: float | None = None,
        on_snapshot=None, progress=None, diag_every: int = 1) -> RunReport:
    """Advance to t >= t_final, recording diagnostics and emitting snapshots."""
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    n_steps = 0 if t_final == 0 else int(math.ceil(t_final / sim.dt - 1e-9))
    started = _time.perf_counter()
    series = [sim.diagnostics()]
    snapshots = 0
    if on_snapshot is not None:
        on_snapshot(sim)
        snapshots += 1
    max_div = 0.0
    last_bucket = 0
    for i in range(n_steps):
        advance(sim)
        if sim.step % diag_every == 0 or i == n_steps - 1:
            series.append(sim.diagnostics())
        div = float(np.abs(discrete_divergence(sim.flow.u, sim.flow.v, sim.dd)).max())
        max_div = max(max_div, div)
        if on_snapshot is not None and snapshot_every:
            bucket = int((sim.time + 1e-12) / snapshot_every)
            if bucket > last_bucket or i == n_steps - 1:
                on_snapshot(sim)
                snapshots += 1
                last_bucket = bucket
        elif on_snapshot is not None and i == n_steps - 1:
            on_snapshot(sim)
            snapshots += 1
        if progress is not None and (sim.step % 200 == 0 or i == n_steps - 1):
            progress(sim.step, n_steps, sim.time)
    final = series[-1] if series else sim.diagnostics()
    return RunReport(final=final, series=series, steps=sim.step, dt=sim.dt,
                     wall_time=_time.perf_counter() - started,
                     solver_stats={k: dict(v) for k, v in sim.solver.stats.items()},
                     warnings=list(sim.warnings), snapshots=snapshots,
                     max_divergence=max_div)
