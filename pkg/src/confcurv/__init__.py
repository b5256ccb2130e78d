"""Numerics for prescribed-curvature equations on Garding cones."""
from ._kernels import BACKEND
from .errors import (
    AdmissibilityError,
    DiscretizationError,
    DomainError,
    ParameterError,
    SolverError,
    StallError,
)
from .symfunc import (
    AVERAGE,
    ConeSpec,
    CurvatureOperator,
    cone_transform_mu,
    elementary_sigma,
    ellipticity_constants,
    f_eval,
    f_gradient,
    in_cone,
    kappa_of_cone,
    quotient_operator,
    sigma_gradient,
    validate_tau_alpha,
    vartheta_of_cone,
)
from .conformal import (
    FLAT,
    ModelGeometry,
    PointwiseTensorEigen,
    RadialProfile,
    SchoutenParams,
    modified_schouten_eigen,
    ricci_eigen,
    scalar_curvature_conformal,
)
from .grids import GridSpec, build_grid, derivative_matrices
from .radial_pde import (
    DirichletSpec,
    EquationParams,
    Psi,
    SolveReport,
    Tolerances,
    linearized_operator,
    newton_solve,
    residual,
    solve,
)
from .barriers import (
    certify_completeness,
    certify_lower_collar,
    certify_upper_collar,
    euclidean_subsolution_certificate,
)
from .exhaustion import ExhaustionSpec, run_exhaustion

__version__ = "0.1.0"
