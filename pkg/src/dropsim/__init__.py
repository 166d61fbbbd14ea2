"""Bioconvection in sessile drops: a diffuse-domain chemotaxis-fluid simulator."""

from .core import Grid, Params, PhysicalParams, ScalarField, cutoff_r, \
    dimensionless_params, make_grid
from .geometry import DiffuseDomain, ShapeSpec, build_diffuse_domain, \
    shape_value, signed_distance

__version__ = "0.1.0"

__all__ = [
    "Grid", "Params", "PhysicalParams", "ScalarField", "cutoff_r",
    "dimensionless_params", "make_grid", "DiffuseDomain", "ShapeSpec",
    "build_diffuse_domain", "shape_value", "signed_distance", "__version__",
]
