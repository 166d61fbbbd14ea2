"""Projection update of velocity, pressure, and oxygen on the diffuse domain.

One fluid step solves, in order: two implicit Helmholtz systems for the
predicted velocity components (BDF2 time term, extrapolated advection and
pressure gradient explicit, phi-weighted diffusion implicit, buoyancy from
the fresh cell density), one variable-coefficient Poisson system for the
pressure increment, the explicit gradient correction of the velocity, the
pressure accumulation, and one implicit system for oxygen (advection and
consumption explicit at the extrapolated level, diffusion and the boundary
penalty (1-phi)/eps^3 implicit). The very first step uses the analogous
backward-Euler variant.

The buoyancy force enters the vertical momentum equation with a minus sign
(cells are denser than the carrier fluid and sink); the governing equations
fix that sign even though one display of the discrete system flips it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import boundary
from .core import Params, ScalarField, cutoff_r
from .geometry import DiffuseDomain
from .linsolve import GhostPolicy, SolveOptions, StencilOperator, solve


@dataclass
class FlowState:
    """Velocity, pressure, oxygen at the current and previous time level."""

    u: ScalarField
    v: ScalarField
    p: ScalarField
    c: ScalarField
    u_prev: ScalarField
    v_prev: ScalarField
    c_prev: ScalarField
    psi: ScalarField

    @classmethod
    def resting(cls, grid, c0=None, u0=None, v0=None, p0=None, mode="sessile"):
        """Initial state: given (or zero) velocity and pressure, saturated oxygen."""
        u = u0.copy() if u0 is not None else ScalarField.zeros(grid)
        v = v0.copy() if v0 is not None else ScalarField.zeros(grid)
        p = p0.copy() if p0 is not None else ScalarField.zeros(grid)
        c = c0.copy() if c0 is not None else ScalarField.full(grid, 1.0)
        boundary.fill_ghosts_velocity(u, v, mode)
        boundary.fill_ghosts_oxygen(c, mode)
        boundary.fill_ghosts_neumann(p)
        return cls(u=u, v=v, p=p, c=c, u_prev=u.copy(), v_prev=v.copy(),
                   c_prev=c.copy(), psi=ScalarField.zeros(grid))


def _ddx(values, dx):
    return (values[2:, 1:-1] - values[:-2, 1:-1]) / (2.0 * dx)


def _ddy(values, dy):
    return (values[1:-1, 2:] - values[1:-1, :-2]) / (2.0 * dy)


def _lap_coefficients(dd: DiffuseDomain):
    g = dd.grid
    e = dd.phi_fx[1:, :] / g.dx**2
    w = dd.phi_fx[:-1, :] / g.dx**2
    n = dd.phi_fy[:, 1:] / g.dy**2
    s = dd.phi_fy[:, :-1] / g.dy**2
    return e, w, n, s


def _velocity_policies(grid, mode):
    bottom = (GhostPolicy("copy") if mode == "surrounded"
              else GhostPolicy("value", np.zeros(grid.n)))
    return {"left": GhostPolicy("copy"), "right": GhostPolicy("copy"),
            "top": GhostPolicy("copy"), "bottom": bottom}


def _oxygen_policies(grid, mode):
    one_m = np.ones(grid.m)
    bottom = (GhostPolicy("value", np.ones(grid.n)) if mode == "surrounded"
              else GhostPolicy("copy"))
    return {"left": GhostPolicy("value", one_m), "right": GhostPolicy("value", one_m),
            "top": GhostPolicy("value", np.ones(grid.n)), "bottom": bottom}


def _neumann_policies():
    return {side: GhostPolicy("copy") for side in ("left", "right", "bottom", "top")}


def momentum_operator(dd: DiffuseDomain, params: Params, dt: float,
                      mode: str, first=False) -> StencilOperator:
    """Helmholtz operator of the velocity predictor (same for both components)."""
    e, w, n, s = _lap_coefficients(dd)
    sc = params.schmidt
    mass = (1.0 if first else 1.5) * dd.phi_c.interior / dt
    return StencilOperator(mass + sc * (e + w + n + s),
                           -sc * e, -sc * w, -sc * n, -sc * s,
                           _velocity_policies(dd.grid, mode))


def _pressure_faces(dd: DiffuseDomain):
    """Arithmetic-mean face values of phi for the projection.

    The sampled (midpoint) face values decay like the geometric mean of the
    neighbors; across the clamped tail that lets a face carry a flux set by
    its large-phi neighbor while the gradient reconstructing that flux blows
    up by the face/center ratio, and the unweighted velocity correction then
    feeds the blowup back into the advecting field. Averaged faces bound the
    gradient amplification by two and keep the projection operator and its
    right-hand side exactly face-compatible.
    """
    phi = dd.phi_c.values
    fx = 0.5 * (phi[:-1, 1:-1] + phi[1:, 1:-1])
    fy = 0.5 * (phi[1:-1, :-1] + phi[1:-1, 1:])
    return fx, fy


def pressure_operator(dd: DiffuseDomain) -> StencilOperator:
    """Negated phi-weighted Laplacian with Neumann copies (SPD, constants null)."""
    g = dd.grid
    fx, fy = _pressure_faces(dd)
    e = fx[1:, :] / g.dx**2
    w = fx[:-1, :] / g.dx**2
    n = fy[:, 1:] / g.dy**2
    s = fy[:, :-1] / g.dy**2
    return StencilOperator(e + w + n + s, -e, -w, -n, -s, _neumann_policies())


def oxygen_operator(dd: DiffuseDomain, params: Params, dt: float,
                    mode: str, first=False) -> StencilOperator:
    e, w, n, s = _lap_coefficients(dd)
    phi = dd.phi_c.interior
    mass = (1.0 if first else 1.5) * phi / dt
    penalty = (1.0 - phi) / dd.eps**3
    d = params.delta
    return StencilOperator(mass + penalty + d * (e + w + n + s),
                           -d * e, -d * w, -d * n, -d * s,
                           _oxygen_policies(dd.grid, mode))


def discrete_divergence(u: ScalarField, v: ScalarField, dd: DiffuseDomain):
    """Centered divergence of phi*u on interior cells (uses ghost values)."""
    g = u.grid
    phi = dd.phi_c.values
    pu = phi * u.values
    pv = phi * v.values
    return _ddx(pu, g.dx) + _ddy(pv, g.dy)


def face_divergence(u: ScalarField, v: ScalarField, dd: DiffuseDomain,
                    closed_boundary=True):
    """Face-matched divergence of phi*u: face phi times face-averaged velocity.

    This is the divergence whose fluxes live on the same faces as the
    pressure operator. Feeding the Poisson solve with it keeps the pressure
    bounded across the clamped far tail of phi, where the wide centered
    divergence would demand O(1/phi_floor) gradients.

    With ``closed_boundary`` the normal flux through the embedding-box faces
    is the boundary-condition value zero (no slip at the substrate, vanishing
    phi elsewhere), which makes the right-hand side exactly compatible with
    the homogeneous-Neumann pressure problem.
    """
    g = u.grid
    pfx, pfy = _pressure_faces(dd)
    uf = 0.5 * (u.values[:-1, 1:-1] + u.values[1:, 1:-1])
    vf = 0.5 * (v.values[1:-1, :-1] + v.values[1:-1, 1:])
    fx = pfx * uf
    fy = pfy * vf
    if closed_boundary:
        fx[0, :] = 0.0
        fx[-1, :] = 0.0
        fy[:, 0] = 0.0
        fy[:, -1] = 0.0
    return (fx[1:, :] - fx[:-1, :]) / g.dx + (fy[:, 1:] - fy[:, :-1]) / g.dy


class FlowSolver:
    """One fluid/oxygen time step with operators cached across the run."""

    def __init__(self, dd: DiffuseDomain, params: Params, dt: float, mode: str,
                 opts: SolveOptions | None = None):
        self.dd = dd
        self.params = params
        self.dt = dt
        self.mode = mode
        base = opts or SolveOptions()
        self.opts = base
        self.opts_pressure = SolveOptions(rel_tol=base.rel_tol, abs_tol=base.abs_tol,
                                          max_iter=base.max_iter, nullspace="constant")
        self.op_mom = momentum_operator(dd, params, dt, mode, first=False)
        self.op_mom_first = momentum_operator(dd, params, dt, mode, first=True)
        self.op_psi = pressure_operator(dd)
        self.op_oxy = oxygen_operator(dd, params, dt, mode, first=False)
        self.op_oxy_first = oxygen_operator(dd, params, dt, mode, first=True)
        # The operators never change within a run, so one-time factorizations
        # pay for themselves immediately (the clamped phi contrast makes plain
        # Jacobi-CG need hundreds of iterations on the pressure system).
        self.pc_mom = self.op_mom.banded_cholesky_preconditioner()
        self.pc_psi = self.op_psi.banded_cholesky_preconditioner(regularize=1e-12)
        self.pc_oxy = self.op_oxy.banded_cholesky_preconditioner()
        # Where phi sits on the clamp floor the momentum equation degenerates
        # to 0 = 0 and the discrete velocity there is pure artifact; left
        # alive it grows until it breaks the advection CFL bound. Freeze it.
        self.vacuum = dd.phi_c.interior <= dd.phi_floor
        self.stats = {name: {} for name in ("momentum_u", "momentum_v", "pressure", "oxygen")}

    def _wrap_velocity(self, grid, u_int, v_int):
        u = ScalarField.zeros(grid)
        v = ScalarField.zeros(grid)
        u.interior[:] = u_int
        v.interior[:] = v_int
        boundary.fill_ghosts_velocity(u, v, self.mode)
        return u, v

    def predict(self, state: FlowState, n_new: ScalarField, first=False):
        g = self.dd.grid
        phi = self.dd.phi_c.interior
        sc, gam = self.params.schmidt, self.params.gamma
        dt = self.dt
        p = state.p.values
        if first:
            us, vs = state.u.values, state.v.values
            time_u = state.u.interior / dt
            time_v = state.v.interior / dt
        else:
            us = 2.0 * state.u.values - state.u_prev.values
            vs = 2.0 * state.v.values - state.v_prev.values
            time_u = (4.0 * state.u.interior - state.u_prev.interior) / (2.0 * dt)
            time_v = (4.0 * state.v.interior - state.v_prev.interior) / (2.0 * dt)
        usi = us[1:-1, 1:-1]
        vsi = vs[1:-1, 1:-1]
        adv_u = usi * _ddx(us, g.dx) + vsi * _ddy(us, g.dy)
        adv_v = usi * _ddx(vs, g.dx) + vsi * _ddy(vs, g.dy)
        rhs_u = phi * (time_u - adv_u - sc * _ddx(p, g.dx))
        rhs_v = phi * (time_v - adv_v - sc * _ddy(p, g.dy) - sc * gam * n_new.interior)
        op = self.op_mom_first if first else self.op_mom
        pc = None if first else self.pc_mom
        u_t = solve(op, rhs_u, self.opts, guess=state.u.interior,
                    stats=self.stats["momentum_u"], precond=pc)
        v_t = solve(op, rhs_v, self.opts, guess=state.v.interior,
                    stats=self.stats["momentum_v"], precond=pc)
        return self._wrap_velocity(g, u_t, v_t)

    def poisson(self, u_t: ScalarField, v_t: ScalarField, guess=None, first=False):
        g = self.dd.grid
        coef = (1.0 if first else 1.5) / (self.params.schmidt * self.dt)
        div = face_divergence(u_t, v_t, self.dd)
        psi_int = solve(self.op_psi, -coef * div, self.opts_pressure,
                        guess=guess, stats=self.stats["pressure"],
                        precond=self.pc_psi)
        psi = ScalarField.zeros(g)
        psi.interior[:] = psi_int
        boundary.fill_ghosts_neumann(psi)
        return psi

    def correct(self, u_t: ScalarField, v_t: ScalarField, psi: ScalarField, first=False):
        g = self.dd.grid
        fac = (1.0 if first else 2.0 / 3.0) * self.params.schmidt * self.dt
        u_int = u_t.interior - fac * _ddx(psi.values, g.dx)
        v_int = v_t.interior - fac * _ddy(psi.values, g.dy)
        return self._wrap_velocity(g, u_int, v_int)

    def oxygen(self, state: FlowState, n_new, u_new, v_new, first=False):
        g = self.dd.grid
        phi = self.dd.phi_c.interior
        dt = self.dt
        if first:
            cs = state.c.values
            time_c = state.c.interior / dt
        else:
            cs = 2.0 * state.c.values - state.c_prev.values
            time_c = (4.0 * state.c.interior - state.c_prev.interior) / (2.0 * dt)
        adv = u_new.interior * _ddx(cs, g.dx) + v_new.interior * _ddy(cs, g.dy)
        react = self.params.beta * cutoff_r(cs[1:-1, 1:-1], self.params.c_star) * n_new.interior
        rhs = phi * (time_c - adv - react) + (1.0 - phi) / self.dd.eps**3
        op = self.op_oxy_first if first else self.op_oxy
        c_int = solve(op, rhs, self.opts, guess=state.c.interior,
                      stats=self.stats["oxygen"], precond=None if first else self.pc_oxy)
        c = ScalarField.zeros(g)
        c.interior[:] = c_int
        boundary.fill_ghosts_oxygen(c, self.mode)
        return c

    def step(self, state: FlowState, n_new: ScalarField, first=False) -> FlowState:
        u_t, v_t = self.predict(state, n_new, first=first)
        psi = self.poisson(u_t, v_t, guess=state.psi.interior, first=first)
        u_new, v_new = self.correct(u_t, v_t, psi, first=first)
        p_new = update_pressure(psi, state.p)
        c_new = self.oxygen(state, n_new, u_new, v_new, first=first)
        return FlowState(u=u_new, v=v_new, p=p_new, c=c_new,
                         u_prev=state.u, v_prev=state.v, c_prev=state.c, psi=psi)


def _mode_of(dd: DiffuseDomain, mode):
    if mode is not None:
        return mode
    return dd.shape.mode if dd.shape is not None else "sessile"


def momentum_predict(state, n_new, dd, params, dt, mode=None, first=False,
                     opts=None):
    """Solve the two implicit predictor systems for the tilde velocity."""
    fs = FlowSolver(dd, params, dt, _mode_of(dd, mode), opts)
    return fs.predict(state, n_new, first=first)


def pressure_poisson(u_tilde, v_tilde, dd, params, dt, first=False, opts=None,
                     guess=None):
    """Solve the phi-weighted Poisson system for the pressure increment."""
    fs = FlowSolver(dd, params, dt, _mode_of(dd, None), opts)
    return fs.poisson(u_tilde, v_tilde, guess=guess, first=first)


def correct_velocity(u_tilde, v_tilde, psi, params, dt, mode="sessile", first=False):
    """Subtract the scaled centered pressure-increment gradient."""
    g = u_tilde.grid
    fac = (1.0 if first else 2.0 / 3.0) * params.schmidt * dt
    u = ScalarField.zeros(g)
    v = ScalarField.zeros(g)
    u.interior[:] = u_tilde.interior - fac * _ddx(psi.values, g.dx)
    v.interior[:] = v_tilde.interior - fac * _ddy(psi.values, g.dy)
    boundary.fill_ghosts_velocity(u, v, mode)
    return u, v


def update_pressure(psi: ScalarField, p_old: ScalarField) -> ScalarField:
    """Accumulate the increment and re-impose the zero-mean gauge."""
    p = ScalarField(p_old.grid, psi.values + p_old.values)
    p.values -= p.interior.mean()
    return p


def oxygen_solve(state, n_new, u_new, v_new, dd, params, dt, mode=None,
                 first=False, opts=None):
    """Solve the implicit oxygen system, penalty and diffusion implicit."""
    fs = FlowSolver(dd, params, dt, _mode_of(dd, mode), opts)
    return fs.oxygen(state, n_new, u_new, v_new, first=first)


def first_step(state, n_new, dd, params, dt, mode=None, opts=None):
    """Backward-Euler startup: returns (u, v, p, c) at the first level."""
    fs = FlowSolver(dd, params, dt, _mode_of(dd, mode), opts)
    new = fs.step(state, n_new, first=True)
    return new.u, new.v, new.p, new.c
