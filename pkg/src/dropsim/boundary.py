"""Ghost-cell boundary filling shared by the advection and flow updates.

Sessile mode: the substrate (bottom of the embedding box) is a no-slip wall
with no cell or oxygen flux; sides and top carry the free-surface conditions
rewritten through m = phi*n, which integrate to a phi-scaled copy times
exp(alpha*(1 - c)) for the cell density, a plain copy for velocity, and fixed
saturation (c = 1) for oxygen. Surrounded mode applies the free-surface set on
all four sides. The auxiliary pressure variable always takes Neumann copies.
"""

from __future__ import annotations

import numpy as np

from .core import Params, ScalarField
from .geometry import DiffuseDomain


def _fill_corners(v):
    v[0, 0] = v[1, 0]
    v[-1, 0] = v[-2, 0]
    v[0, -1] = v[1, -1]
    v[-1, -1] = v[-2, -1]


def fill_ghosts_m(m: ScalarField, c: ScalarField, dd: DiffuseDomain,
                  params: Params, mode: str) -> ScalarField:
    """Ghost fill of the transformed cell density m = phi*n."""
    v = m.values
    phi = dd.phi_c.values
    cc = c.values
    a = params.alpha
    v[0, 1:-1] = phi[0, 1:-1] / phi[1, 1:-1] * v[1, 1:-1] * np.exp(a * (1.0 - cc[1, 1:-1]))
    v[-1, 1:-1] = phi[-1, 1:-1] / phi[-2, 1:-1] * v[-2, 1:-1] * np.exp(a * (1.0 - cc[-2, 1:-1]))
    v[1:-1, -1] = phi[1:-1, -1] / phi[1:-1, -2] * v[1:-1, -2] * np.exp(a * (1.0 - cc[1:-1, -2]))
    if mode == "surrounded":
        v[1:-1, 0] = phi[1:-1, 0] / phi[1:-1, 1] * v[1:-1, 1] * np.exp(a * (1.0 - cc[1:-1, 1]))
    else:
        v[1:-1, 0] = phi[1:-1, 0] / phi[1:-1, 1] * v[1:-1, 1]
    _fill_corners(v)
    return m


def fill_ghosts_velocity(u: ScalarField, v: ScalarField, mode: str):
    """Copy ghosts on free sides; zero ghosts on the no-slip substrate."""
    for f in (u, v):
        vals = f.values
        vals[0, 1:-1] = vals[1, 1:-1]
        vals[-1, 1:-1] = vals[-2, 1:-1]
        vals[1:-1, -1] = vals[1:-1, -2]
        if mode == "surrounded":
            vals[1:-1, 0] = vals[1:-1, 1]
        else:
            vals[1:-1, 0] = 0.0
        _fill_corners(vals)
    return u, v


def fill_ghosts_oxygen(c: ScalarField, mode: str) -> ScalarField:
    """Saturated oxygen on free sides; no flux through the substrate."""
    vals = c.values
    vals[0, 1:-1] = 1.0
    vals[-1, 1:-1] = 1.0
    vals[1:-1, -1] = 1.0
    if mode == "surrounded":
        vals[1:-1, 0] = 1.0
    else:
        vals[1:-1, 0] = vals[1:-1, 1]
    _fill_corners(vals)
    return c


def fill_ghosts_neumann(f: ScalarField) -> ScalarField:
    """Copy ghosts on all sides (pressure and its auxiliary variable)."""
    vals = f.values
    vals[0, 1:-1] = vals[1, 1:-1]
    vals[-1, 1:-1] = vals[-2, 1:-1]
    vals[1:-1, 0] = vals[1:-1, 1]
    vals[1:-1, -1] = vals[1:-1, -2]
    _fill_corners(vals)
    return f
