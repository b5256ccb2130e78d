"""Exception types shared by the solver modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class AdmissibilityError(ValueError):
    """Eigenvalues left the cone; ``index`` names the violated sigma_j or grid node."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ParameterError(ValueError):
    """Equation coefficients violate a well-posedness condition."""


class DiscretizationError(ValueError):
    pass


class SolverError(RuntimeError):
    """Newton iteration failed; ``report`` carries the iteration history."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StallError(SolverError):
    """Line search could not find an admissible decreasing step."""
