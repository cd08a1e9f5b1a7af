"""Sharp-interface simulation of solid-state dewetting in the plane.

Island boundaries are polylines evolving by surface diffusion, with
orientation-dependent surface energy and migrating contact points on the
substrate line y = 0. The discretization is a semi-implicit parametric
finite element scheme; see the module docstrings for the conventions.
"""

from .anisotropy import (
    AnisotropyModel,
    PhysicalParams,
    classify,
    gamma_eval,
    winterbottom_shape,
    wulff_shape,
    young_residual,
)
from .geometry import (
    Curve,
    DegenerateGeometryError,
    SegmentFrames,
    enclosed_area,
    frames,
    mesh_ratio,
    redistribute,
    resample,
)

__all__ = [
    "AnisotropyModel",
    "PhysicalParams",
    "classify",
    "gamma_eval",
    "winterbottom_shape",
    "wulff_shape",
    "young_residual",
    "Curve",
    "DegenerateGeometryError",
    "SegmentFrames",
    "enclosed_area",
    "frames",
    "mesh_ratio",
    "redistribute",
    "resample",
]

__version__ = "0.1.0"
