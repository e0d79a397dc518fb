"""Strong-coupling spectral analysis of delta interactions supported on surfaces.

The operator ``H_alpha = -Delta - alpha delta(x - Gamma)`` in three
dimensions, with Gamma a graph surface, has eigenvalues
``lambda_j(alpha) = -alpha^2/4 + mu_j + O(log(alpha)/alpha)`` where ``mu_j`` are
the eigenvalues of ``S = -Delta_Gamma + K - M^2``.  The package computes the
pieces of this picture and checks them against each other.

Modules
-------
geometry
    Surfaces, curvature grids, layer fields and the Jacobi equation.
transverse
    The one-dimensional operators across the layer.
surface_operator
    S and the estimating operators U_d^pm, a radial oracle and trial forms.
bracketing
    Two-sided eigenvalue bounds and their asymptotics.
birman_schwinger
    Direct eigenvalues of H_alpha from the Birman-Schwinger principle.
squeezed
    Regular potentials squeezed onto the surface.
cli
    Batch driver.
"""

from .bracketing import asymptotic_residuals, layer_width, sandwich
from .birman_schwinger import find_eigenvalues, find_eigenvalues_radial
from .errors import (
    ConfigError,
    ConjugatePoint,
    DegenerateMetric,
    DeltaSurfError,
    DropPoint,
    InjectivityViolation,
    InsufficientData,
    NoBoundState,
    NoConvergence,
    PipelineError,
    ValidityViolation,
)
from .geometry import (
    build_geometry,
    build_layer,
    gaussian_bump,
    general_graph,
    hyperboloid,
    paraboloid,
    plane,
)
from .surface_operator import assemble_S, assemble_U, radial_reduce_solve, solve_eigen, variational_bound
from .transverse import TransverseProblem, kappa_minus, kappa_plus, transverse_form_bound

__version__ = "0.1.0"

__all__ = [
    "asymptotic_residuals",
    "layer_width",
    "sandwich",
    "find_eigenvalues",
    "find_eigenvalues_radial",
    "ConfigError",
    "ConjugatePoint",
    "DegenerateMetric",
    "DeltaSurfError",
    "DropPoint",
    "InjectivityViolation",
    "InsufficientData",
    "NoBoundState",
    "NoConvergence",
    "PipelineError",
    "ValidityViolation",
    "build_geometry",
    "build_layer",
    "gaussian_bump",
    "general_graph",
    "hyperboloid",
    "paraboloid",
    "plane",
    "assemble_S",
    "assemble_U",
    "radial_reduce_solve",
    "solve_eigen",
    "variational_bound",
    "TransverseProblem",
    "kappa_minus",
    "kappa_plus",
    "transverse_form_bound",
]
