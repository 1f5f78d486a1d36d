"""Exception types shared across the package."""


class MalinError(Exception):
    """Base class for all package errors."""


class DomainError(MalinError):
    """A point lies outside the admissible domain of a potential."""


class ConvexityError(MalinError):
    """A sampled Hessian failed positive definiteness.

    Carries the offending point in ``args[1]`` when available.
    """


class PinchViolation(MalinError):
    """Sampled Hessian determinant left the declared pinch interval."""


class ContainmentError(MalinError):
    """A section is not compactly contained in the configured domain box."""


class ConditioningError(MalinError):
    """A geometric body or linear system is too degenerate to trust."""


class MeshResourceError(MalinError):
    """Requested mesh size would exceed the node budget."""


class MeshQualityError(MalinError):
    """Generated mesh violates a quality guarantee."""


class AssemblyError(MalinError):
    """Non-finite coefficient sample during assembly; names the simplex."""


class SolverConvergenceError(MalinError):
    """Iterative linear solve stagnated; carries the final residual."""


class ContractError(MalinError):
    """An argument violates an operation's contract."""


class HypothesisError(MalinError):
    """Input data violates a structural hypothesis (e.g. div B > 0, q <= n/2)."""


class PecletWarning(UserWarning):
    """Element Peclet number exceeds the advection-resolution threshold."""
