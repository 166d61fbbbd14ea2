"""Positivity-preserving second-order finite-volume upwind scheme.

Evolves the transformed cell density m = phi*n in flux form: upwind
convection-chemotaxis fluxes built from a piecewise-linear reconstruction
with a minmod fallback wherever the central slopes would produce negative
corner values, centered phi-weighted diffusion fluxes, and an explicit
three-step strong-stability-preserving update (plain forward Euler for the
first two levels).

Face array layout: x-fluxes and x-speeds have shape (n+1, m), entry [j, k]
sitting on the vertical face x = x_min + j*dx of interior row k+1; y-arrays
have shape (n, m+1) with entry [j, k] on the horizontal face y = y_min + k*dy
of interior column j+1. Ghost cells take part in the reconstruction with zero
slopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid, InvalidParameterError, Params, ScalarField, cutoff_r
from .geometry import DiffuseDomain

NEGATIVE_TOL = -1e-13


class PositivityError(RuntimeError):
    """A cell average dropped below the roundoff tolerance."""

    def __init__(self, message, cell=None, value=None):
        super().__init__(message)
        self.cell = cell
        self.value = value


def _check_nonnegative(values, label):
    worst = values.min()
    if worst < NEGATIVE_TOL:
        j, k = np.unravel_index(np.argmin(values), values.shape)
        raise PositivityError(
            f"{label}: cell ({j}, {k}) has value {worst:.3e} < {NEGATIVE_TOL:.0e}",
            cell=(int(j), int(k)), value=float(worst))


def minmod(z1, z2, z3):
    """Minmod of three reals: min if all positive, max if all negative, else 0."""
    if z1 > 0 and z2 > 0 and z3 > 0:
        return min(z1, z2, z3)
    if z1 < 0 and z2 < 0 and z3 < 0:
        return max(z1, z2, z3)
    return 0.0


def _minmod3(z1, z2, z3):
    pos = (z1 > 0) & (z2 > 0) & (z3 > 0)
    neg = (z1 < 0) & (z2 < 0) & (z3 < 0)
    return np.where(pos, np.minimum(np.minimum(z1, z2), z3),
                    np.where(neg, np.maximum(np.maximum(z1, z2), z3), 0.0))


def slopes_central(field: ScalarField):
    """Central-difference slopes on interior cells; ghost slopes stay zero."""
    v = field.values
    g = field.grid
    sx = np.zeros_like(v)
    sy = np.zeros_like(v)
    sx[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * g.dx)
    sy[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * g.dy)
    return sx, sy


@dataclass
class Reconstruction:
    """Per-cell slopes and reconstructed side values (ghost-padded arrays)."""

    slopes_x: np.ndarray
    slopes_y: np.ndarray
    m_e: np.ndarray
    m_w: np.ndarray
    m_n: np.ndarray
    m_s: np.ndarray


def _side_values(values, slopes, half):
    hi = values + half * slopes
    lo = values - half * slopes
    return hi, lo


def reconstruct_linear(field: ScalarField) -> Reconstruction:
    """Unlimited piecewise-linear reconstruction (used for u, v, c)."""
    sx, sy = slopes_central(field)
    g = field.grid
    m_e, m_w = _side_values(field.values, sx, g.dx / 2.0)
    m_n, m_s = _side_values(field.values, sy, g.dy / 2.0)
    return Reconstruction(sx, sy, m_e, m_w, m_n, m_s)


def reconstruct_positive(mbar: ScalarField) -> Reconstruction:
    """Reconstruction of the cell density, falling back to limited slopes.

    Central slopes are replaced by the minmod of the one-sided differences
    (scaled by 2) and the central one, independently per direction, exactly
    in the cells where a central corner value would go negative.
    """
    _check_nonnegative(mbar.values, "reconstruct_positive input")
    g = mbar.grid
    v = mbar.values
    sx, sy = slopes_central(mbar)
    m_e, m_w = _side_values(v, sx, g.dx / 2.0)
    bad = (m_e[1:-1, 1:-1] < 0) | (m_w[1:-1, 1:-1] < 0)
    if bad.any():
        fwd = 2.0 * (v[2:, 1:-1] - v[1:-1, 1:-1]) / g.dx
        bwd = 2.0 * (v[1:-1, 1:-1] - v[:-2, 1:-1]) / g.dx
        limited = _minmod3(bwd, sx[1:-1, 1:-1], fwd)
        sx[1:-1, 1:-1] = np.where(bad, limited, sx[1:-1, 1:-1])
        m_e, m_w = _side_values(v, sx, g.dx / 2.0)
    m_n, m_s = _side_values(v, sy, g.dy / 2.0)
    bad = (m_n[1:-1, 1:-1] < 0) | (m_s[1:-1, 1:-1] < 0)
    if bad.any():
        fwd = 2.0 * (v[1:-1, 2:] - v[1:-1, 1:-1]) / g.dy
        bwd = 2.0 * (v[1:-1, 1:-1] - v[1:-1, :-2]) / g.dy
        limited = _minmod3(bwd, sy[1:-1, 1:-1], fwd)
        sy[1:-1, 1:-1] = np.where(bad, limited, sy[1:-1, 1:-1])
        m_n, m_s = _side_values(v, sy, g.dy / 2.0)
    return Reconstruction(sx, sy, m_e, m_w, m_n, m_s)


def local_speeds(c: ScalarField, u: ScalarField, v: ScalarField, params: Params):
    """Convection-chemotaxis speeds at faces from one-sided reconstructions."""
    g = c.grid
    rec_c = reconstruct_linear(c)
    rec_u = reconstruct_linear(u)
    rec_v = reconstruct_linear(v)
    cx = (c.values[1:, 1:-1] - c.values[:-1, 1:-1]) / g.dx
    u_face = 0.5 * (rec_u.m_e[:-1, 1:-1] + rec_u.m_w[1:, 1:-1])
    c_face = 0.5 * (rec_c.m_e[:-1, 1:-1] + rec_c.m_w[1:, 1:-1])
    a = u_face + params.alpha * cutoff_r(c_face, params.c_star) * cx
    cy = (c.values[1:-1, 1:] - c.values[1:-1, :-1]) / g.dy
    v_face = 0.5 * (rec_v.m_n[1:-1, :-1] + rec_v.m_s[1:-1, 1:])
    c_face = 0.5 * (rec_c.m_n[1:-1, :-1] + rec_c.m_s[1:-1, 1:])
    b = v_face + params.alpha * cutoff_r(c_face, params.c_star) * cy
    return a, b


def convective_fluxes(rec: Reconstruction, a, b):
    """Upwind fluxes; the tie at speed zero follows the >= branch (value 0)."""
    fx = np.where(a >= 0.0, a * rec.m_e[:-1, 1:-1], a * rec.m_w[1:, 1:-1])
    fy = np.where(b >= 0.0, b * rec.m_n[1:-1, :-1], b * rec.m_s[1:-1, 1:])
    return fx, fy


def diffusive_fluxes(mbar: ScalarField, dd: DiffuseDomain):
    """Centered phi-weighted fluxes of n = m/phi (ratio-capped face values)."""
    g = mbar.grid
    ratio = mbar.values / dd.phi_c.values
    gx = dd.phi_fx_flux / g.dx * (ratio[1:, 1:-1] - ratio[:-1, 1:-1])
    gy = dd.phi_fy_flux / g.dy * (ratio[1:-1, 1:] - ratio[1:-1, :-1])
    return gx, gy


@dataclass
class FluxSet:
    """All face quantities of one advection right-hand side evaluation."""

    fx: np.ndarray
    fy: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def max_speeds(self):
        return float(np.abs(self.a).max()), float(np.abs(self.b).max())


def compute_fluxes(mbar, c, u, v, dd, params) -> FluxSet:
    rec = reconstruct_positive(mbar)
    a, b = local_speeds(c, u, v, params)
    fx, fy = convective_fluxes(rec, a, b)
    gx, gy = diffusive_fluxes(mbar, dd)
    return FluxSet(fx, fy, gx, gy, a, b)


def rhs_divergence(flux: FluxSet, grid: Grid) -> ScalarField:
    """Flux-form right-hand side on interior cells."""
    rhs = ScalarField.zeros(grid)
    rhs.interior[:] = (
        -(flux.fx[1:, :] - flux.fx[:-1, :]) / grid.dx
        - (flux.fy[:, 1:] - flux.fy[:, :-1]) / grid.dy
        + (flux.gx[1:, :] - flux.gx[:-1, :]) / grid.dx
        + (flux.gy[:, 1:] - flux.gy[:, :-1]) / grid.dy
    )
    return rhs


def euler_step(m_l: ScalarField, rhs_l: ScalarField, dt: float) -> ScalarField:
    """Forward Euler update, used for the first two time levels."""
    out = m_l.copy()
    out.interior[:] = m_l.interior + dt * rhs_l.interior
    _check_nonnegative(out.interior, "euler_step output")
    return out


def ssp_step(m_l: ScalarField, m_lm2: ScalarField, rhs_l: ScalarField,
             dt: float) -> ScalarField:
    """Three-step SSP update: 3/4 m^l + 3/2 dt rhs^l + 1/4 m^(l-2)."""
    out = m_l.copy()
    out.interior[:] = (0.75 * m_l.interior + 1.5 * dt * rhs_l.interior
                       + 0.25 * m_lm2.interior)
    _check_nonnegative(out.interior, "ssp_step output")
    return out


def cfl_dt(dd: DiffuseDomain, a_max: float, b_max: float, grid: Grid,
           cfl_phi_threshold: float = 1e-3) -> float:
    """Fixed time step from the positivity CFL bound.

    The per-cell diffusion bound is minimized only over cells whose center
    phi exceeds ``cfl_phi_threshold``; in the clamped far tail the face/center
    ratios are artifacts of the tanh profile and would collapse the step.
    """
    if not (a_max > 0 and b_max > 0 and np.isfinite(a_max) and np.isfinite(b_max)):
        raise InvalidParameterError(
            f"speed bounds must be positive and finite, got a_max={a_max}, b_max={b_max}")
    phi = dd.phi_c.interior
    east, west = dd.phi_fx[1:, :], dd.phi_fx[:-1, :]
    north, south = dd.phi_fy[:, 1:], dd.phi_fy[:, :-1]
    mask = phi >= cfl_phi_threshold
    if not mask.any():
        raise InvalidParameterError(
            f"no cells with phi >= {cfl_phi_threshold}; CFL bound undefined")
    dx2, dy2 = grid.dx * grid.dx, grid.dy * grid.dy
    term = 4.0 * phi * dx2 * dy2 / ((north + south) * dx2 + (east + west) * dy2)
    bound = min(grid.dx / a_max, grid.dy / b_max, float(term[mask].min()))
    if not mask.all():
        # Cells below the threshold still evolve explicitly; with the
        # ratio-capped flux faces their diffusion bound cannot collapse.
        e2, w2 = dd.phi_fx_flux[1:, :], dd.phi_fx_flux[:-1, :]
        n2, s2 = dd.phi_fy_flux[:, 1:], dd.phi_fy_flux[:, :-1]
        term2 = 4.0 * phi * dx2 * dy2 / ((n2 + s2) * dx2 + (e2 + w2) * dy2)
        bound = min(bound, float(term2[~mask].min()))
    return bound / 16.0
