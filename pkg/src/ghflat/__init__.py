"""Explicit Gromov-Hausdorff and intrinsic flat distance bounds on warped-product manifolds."""

from .bounds import (BoundInputs, BoundReport, Trace, convex_bounds, flat_convergence_trace, squeeze_bounds,
                     subdiffeo_bounds)
from .geodesics import diameter, distance, hausdorff_gap, lambda_gap
from .hypotheses import HypothesisReport, check_family, check_ricci, codim_flag
from .manifold import FlatModelSpace, RegionSpec, RotSymManifold, curvature_profile, round_sphere, tip_density, volume
from .profiles import ProfileSyntaxError, parse_profile

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "BoundReport", "FlatModelSpace", "HypothesisReport", "ProfileSyntaxError", "RegionSpec",
    "RotSymManifold", "Trace", "check_family", "check_ricci", "codim_flag", "convex_bounds", "curvature_profile",
    "diameter", "distance", "flat_convergence_trace", "hausdorff_gap", "lambda_gap", "parse_profile",
    "round_sphere", "squeeze_bounds", "subdiffeo_bounds", "tip_density", "volume",
]
