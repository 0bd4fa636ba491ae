"""Numerical laboratory for sphere-valued maps with a boundary flux term.

Discretizes the harmonic-map energy with its surface contribution on box and
graph domains, minimizes the reduced interior energy under tangential boundary
conditions, and certifies the quantitative bounds used in the analysis:
rotation and projection estimates, vortex integrals, index bookkeeping on
closed surfaces, a Poincare-type uniformity experiment, energy decay
exponents, and singular-set detection.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .geometry import (
    TAG_INTERIOR, TAG_GRAPH, TAG_WALL,
    GraphFn, make_graph_fn, SurfaceFrame, surface_frame,
    GraphDomain, build_graph_domain, load_domain,
    BoxDomain, build_box_domain, Cylinder, cylinder_clip,
)
from .fields import (
    EnergyParams, SphereField, make_field, renormalize,
    boundary_mean, tangency_violation, project_tangent,
    field_to_csv, field_from_csv, field_to_vtk,
)
from .energy import (
    EnergyReport, dirichlet_energy, surface_flux_term, surface_curvature_term,
    reduced_energy, full_energy, reduced_energy_gradient, rescaled_energy,
    DecayProfile, decay_profile, decay_fit,
)
from .constructions import (
    BlowupParams, tilt_profile, oldano_barbero_field, closed_form_blowup_energy,
    vortex_field, w1p_vortex_norm, vortex_index,
    RotationField, rotation_field, equator_pattern,
    tangential_trace, equator_rotation_trace, vortex_trace,
    ProjectionQuery, tangent_line_projection,
    projection_dz, projection_dy, projection_dnu,
    VortexRecord, TangentBoundaryData, genus_boundary_field,
)
from .optimizer import (
    BOUNDARY_MODES, StallError, MinimizeOptions, MinimizeTrace,
    minimize_reduced_energy, ResidualReport, euler_lagrange_residual,
    boundary_alignment, gradient_check,
)
from .analysis import (
    BoundReport, random_graph_suite, verify_rotation_bounds,
    verify_projection_bounds, poincare_experiment,
    DecayResult, decay_scan, SingularReport, singular_threshold,
    detect_singular,
)

__all__ = [
    "__version__",
    "TAG_INTERIOR", "TAG_GRAPH", "TAG_WALL",
    "GraphFn", "make_graph_fn", "SurfaceFrame", "surface_frame",
    "GraphDomain", "build_graph_domain", "load_domain",
    "BoxDomain", "build_box_domain", "Cylinder", "cylinder_clip",
    "EnergyParams", "SphereField", "make_field", "renormalize",
    "boundary_mean", "tangency_violation", "project_tangent",
    "field_to_csv", "field_from_csv", "field_to_vtk",
    "EnergyReport", "dirichlet_energy", "surface_flux_term",
    "surface_curvature_term", "reduced_energy", "full_energy",
    "reduced_energy_gradient", "rescaled_energy",
    "DecayProfile", "decay_profile", "decay_fit",
    "BlowupParams", "tilt_profile", "oldano_barbero_field",
    "closed_form_blowup_energy", "vortex_field", "w1p_vortex_norm",
    "vortex_index", "RotationField", "rotation_field", "equator_pattern",
    "tangential_trace", "equator_rotation_trace", "vortex_trace",
    "ProjectionQuery", "tangent_line_projection",
    "projection_dz", "projection_dy", "projection_dnu",
    "VortexRecord", "TangentBoundaryData", "genus_boundary_field",
    "BOUNDARY_MODES", "StallError", "MinimizeOptions", "MinimizeTrace",
    "minimize_reduced_energy", "ResidualReport", "euler_lagrange_residual",
    "boundary_alignment", "gradient_check",
    "BoundReport", "random_graph_suite", "verify_rotation_bounds",
    "verify_projection_bounds", "poincare_experiment",
    "DecayResult", "decay_scan", "SingularReport", "singular_threshold",
    "detect_singular",
]
