"""Exception types shared across the package."""


class QslError(Exception):
    """Base class for all library errors."""


class DomainError(QslError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ShapeError(QslError, ValueError):
    """Matrix or tensor dimensions do not match."""


class NotHermitianError(DomainError):
    pass


class NotUnitaryError(DomainError):
    pass


class NotPSDError(DomainError):
    """A matrix has an eigenvalue below the PSD tolerance."""


class NotAStateError(DomainError):
    pass


class UndefinedAngleError(DomainError):
    """An angle between states is undefined, e.g. for the maximally mixed state."""


class EndpointMismatchError(DomainError):
    """The declared endpoints do not lie on the supplied orbit."""


class InconsistentOrbitError(QslError):
    """An orbit has zero speed but connects distinct states."""


class ConvergenceError(QslError):
    """An iterative linear-algebra routine did not converge."""


class ResourceError(QslError):
    """A computation would exceed the configured size cap."""


class BranchWarning(UserWarning):
    """A unitary eigenphase sits next to the branch cut of the logarithm."""
