"""Exception types shared across the package."""


class FuncModelError(Exception):
    """Base class for all package errors."""


class ValidationError(FuncModelError):
    """Input data violates a structural invariant."""


class SpectrumError(FuncModelError):
    """Requested point is in (or numerically indistinguishable from) the spectrum."""


class DomainError(FuncModelError):
    """Argument lies outside the domain of analyticity / operator domain."""


class SingularPencilError(FuncModelError):
    """A linear-fractional pencil is numerically singular at this point."""


class BoundaryConvergenceError(FuncModelError):
    """Boundary-value ladder did not converge; possible singular point."""
