"""Exception hierarchy shared by all conewright modules."""


class ConewrightError(Exception):
    """Base class for all errors raised by this package."""


class MeshStructureError(ConewrightError):
    """The mesh is not a closed triangulated surface (open edge, non-manifold
    link, non-orientable where orientation is required, ...).  The message
    names the offending simplex."""


class GeometryError(ConewrightError):
    """Edge lengths are geometrically invalid (non-positive length or a face
    violating the strict triangle inequality)."""

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class DegenerateFaceError(GeometryError):
    """A Newton line search could not find a feasible step because a face
    keeps collapsing; ``face`` is the offender."""


class AdmissibilityError(ConewrightError):
    """A cone prescription violates the Gauss-Bonnet constraint
    sum(alpha_j) = 2*pi*N - 2*pi*chi."""

    def __init__(self, message, angle_sum=None, required=None):
        super().__init__(message)
        self.angle_sum = angle_sum
        self.required = required


class NumericalError(ConewrightError):
    """A numerical procedure broke down (singular solve, quadrature failure,
    non-convergent coefficient iteration)."""


class ConvergenceError(NumericalError):
    """An iteration hit its step limit; ``residual`` is the best residual
    reached."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DomainError(ConewrightError, ValueError):
    """An argument lies outside the mathematical domain of the operation
    (log of a series vanishing at 0, radius <= 0, residue at a non-pole...)."""
