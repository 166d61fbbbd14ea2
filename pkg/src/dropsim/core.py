"""Dimensionless parameters, uniform ghost-padded grids, and scalar fields.

Everything downstream works on a cell-centered uniform mesh over the embedding
rectangle, stored with exactly one ghost layer per side, and on the group of
dimensionless numbers that characterize the chemotaxis-fluid system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidParameterError(ValueError):
    """A physical or dimensionless parameter violates its constraints."""


class GridError(ValueError):
    """Degenerate bounds or cell counts."""


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional inputs of the model (SI units)."""

    chi: float        # chemotactic sensitivity
    c_air: float      # saturation oxygen concentration
    d_n: float        # bacteria diffusivity
    d_c: float        # oxygen diffusivity
    kappa: float      # oxygen consumption rate
    n_r: float        # reference cell density
    length: float     # characteristic length scale
    v_b: float        # bacterium volume
    g: float          # gravitational acceleration
    rho: float        # fluid density
    rho_b: float      # bacteria density
    eta: float        # dynamic viscosity

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(
                    f"physical parameter {name!r} must be finite and > 0, got {value}"
                )
        if self.rho_b <= self.rho:
            raise InvalidParameterError(
                f"bacteria must be denser than the fluid (rho_b={self.rho_b} <= rho={self.rho})"
            )


@dataclass(frozen=True)
class Params:
    """Dimensionless parameter set driving the simulation."""

    alpha: float      # chemotactic strength
    beta: float       # oxygen consumption strength
    gamma: float      # buoyancy strength
    delta: float      # oxygen/bacteria diffusivity ratio
    schmidt: float    # Schmidt number
    c_star: float = 0.3   # oxygen inactivity threshold
    eps: float = 0.01     # diffuse-interface width

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "schmidt", "eps"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameterError(
                    f"dimensionless parameter {name!r} must be finite and > 0, got {value}"
                )
        if not (0.0 <= self.c_star <= 1.0) or not math.isfinite(self.c_star):
            raise InvalidParameterError(f"c_star must lie in [0, 1], got {self.c_star}")


def dimensionless_params(p: PhysicalParams, c_star: float = 0.3, eps: float = 0.01) -> Params:
    """Collapse a dimensional parameter set into the five dimensionless numbers.

    ``c_star`` and ``eps`` are configuration inputs, not derived quantities.
    """
    alpha = p.chi * p.c_air / p.d_n
    beta = p.kappa * p.n_r * p.length**2 / (p.c_air * p.d_n)
    gamma = p.v_b * p.n_r * p.g * (p.rho_b - p.rho) * p.length**3 / (p.eta * p.d_n)
    delta = p.d_c / p.d_n
    schmidt = p.eta / (p.d_n * p.rho)
    return Params(alpha=alpha, beta=beta, gamma=gamma, delta=delta,
                  schmidt=schmidt, c_star=c_star, eps=eps)


def cutoff_r(c, c_star):
    """Oxygen cut-off: 1 where c >= c_star, 0 below.

    Kept discontinuous on purpose; accepts scalars or arrays.
    """
    if np.isscalar(c):
        return 1.0 if c >= c_star else 0.0
    return np.where(np.asarray(c) >= c_star, 1.0, 0.0)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh with one ghost layer per side.

    Interior cells carry indices j in [1, n], k in [1, m]; index 0 and n+1
    (resp. m+1) are ghosts. Arrays over the grid have shape (n+2, m+2) with
    axis 0 along x.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    n: int
    m: int
    dx: float
    dy: float

    def center_x(self):
        """Ghost-inclusive x coordinates of cell centers, shape (n+2,)."""
        j = np.arange(self.n + 2)
        return self.x_min + (j - 0.5) * self.dx

    def center_y(self):
        j = np.arange(self.m + 2)
        return self.y_min + (j - 0.5) * self.dy

    def face_x(self):
        """x coordinates of vertical faces, shape (n+1,)."""
        return self.x_min + np.arange(self.n + 1) * self.dx

    def face_y(self):
        return self.y_min + np.arange(self.m + 1) * self.dy

    @property
    def cell_area(self):
        return self.dx * self.dy


def make_grid(bounds, n: int, m: int) -> Grid:
    """Build a uniform grid over ``bounds = (x_min, x_max, y_min, y_max)``."""
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if not all(math.isfinite(b) for b in (x_min, x_max, y_min, y_max)):
        raise GridError(f"non-finite bounds {bounds}")
    if x_max <= x_min or y_max <= y_min:
        raise GridError(f"degenerate bounds {bounds}")
    if n < 3 or m < 3:
        raise GridError(f"need at least 3 cells per direction, got n={n}, m={m}")
    dx = (x_max - x_min) / n
    dy = (y_max - y_min) / m
    return Grid(x_min, x_max, y_min, y_max, int(n), int(m), dx, dy)


class ScalarField:
    """Cell-centered scalar with inline ghost padding, shape (n+2, m+2)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values=None):
        self.grid = grid
        shape = (grid.n + 2, grid.m + 2)
        if values is None:
            self.values = np.zeros(shape)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != shape:
                raise ValueError(f"expected shape {shape}, got {values.shape}")
            self.values = values

    @classmethod
    def zeros(cls, grid):
        return cls(grid)

    @classmethod
    def full(cls, grid, fill):
        return cls(grid, np.full((grid.n + 2, grid.m + 2), float(fill)))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn(x, y) at all cell centers, ghosts included."""
        x = grid.center_x()[:, None]
        y = grid.center_y()[None, :]
        return cls(grid, np.broadcast_to(fn(x, y), (grid.n + 2, grid.m + 2)).astype(float).copy())

    @property
    def interior(self):
        """View of the interior block, shape (n, m)."""
        return self.values[1:-1, 1:-1]

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    def check_finite(self, label="field"):
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise FloatingPointError(f"{label} has non-finite entry at {tuple(bad)}")
        return self
