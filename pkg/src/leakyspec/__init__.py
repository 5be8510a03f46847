"""Schrodinger operators with delta and delta-prime interactions on closed curves and spheres.

Weyl functions, Birman-Schwinger bound states, Krein resolvent differences
and their weak Schatten decay, with independent oracles for validation.
"""
from .boundary_ops import (
    BoundaryOperator,
    ConfigurationError,
    UnsupportedConfigurationError,
    assemble_single_layer,
    mode_weyl_circle,
    mode_weyl_sphere,
    weyl_tilde_matrix,
)
from .bs_solver import (
    BoundState,
    InteractionSpec,
    bs_eigenvalues,
    count_bound_states,
    find_bound_states,
)
from .geometry import BoundaryGrid, ClosedCurve, SphereSurface, build_grid, winding_check
from .krein_schatten import (
    SingularValueProfile,
    VolumeGrid,
    krein_difference,
    power_difference,
    pseudo_resolvent_check,
    singular_profile,
)

__all__ = [
    "BoundState", "BoundaryGrid", "BoundaryOperator", "ClosedCurve", "ConfigurationError",
    "InteractionSpec", "SingularValueProfile", "SphereSurface", "UnsupportedConfigurationError",
    "VolumeGrid", "assemble_single_layer", "bs_eigenvalues", "build_grid", "count_bound_states",
    "find_bound_states", "krein_difference", "mode_weyl_circle", "mode_weyl_sphere",
    "power_difference", "pseudo_resolvent_check", "singular_profile", "weyl_tilde_matrix",
    "winding_check",
]
