"""Spray geometry, projective-metrizability operators and exact symbol audits.

Given a homogeneous second-order ODE system (a spray) defined by coefficient
expressions, this package evaluates the induced connection and curvature
tensors, tests candidate Finsler functions against the metrizability PDE
operators and their integrability obstructions, and verifies the associated
symbol-dimension, exact-sequence and involutivity counts by exact integer
linear algebra.
"""

from .jets import BACKEND, Jet3, apply_unary, extract_partial
from .expr import (
    EvalDomainError,
    ParseError,
    ScalarModel,
    SprayModel,
    eval_jet,
    eval_plain,
    homogeneity_check,
    parse,
    pretty,
    sample_points,
)
from .geometry import (
    AdaptedFrame,
    ConnectionData,
    CurvatureData,
    GeodesicPath,
    TangentPoint,
    adapted_frame_at,
    classify_at,
    connection_at,
    curvature_at,
    deformed_projector_check,
    geodesic_flow,
    hausdorff_distance,
    liouville_vector,
    projective_deform,
    spray_vector,
    vertical_endomorphism,
)
from .operators import (
    HessianReport,
    SolutionAudit,
    curvature_obstruction,
    ddJ,
    euler_lagrange_form,
    extended_rapcsak_form,
    hessian_metric,
    homogeneity_residuals,
    projective_factor,
    rapcsak_form,
    solution_audit,
)
from . import symbols

__version__ = "0.1.0"
