"""Exception hierarchy shared by all shrinkerlab modules."""


class ShrinkerLabError(ValueError):
    """Base class for every error raised by the package."""


class PointOffSurfaceError(ShrinkerLabError):
    pass


class UnsupportedDimensionError(ShrinkerLabError):
    pass


class RadiusTooSmallError(ShrinkerLabError):
    pass


class DegenerateStarError(ShrinkerLabError):
    pass


class SingularMassError(ShrinkerLabError):
    pass


class MissingCurvatureError(ShrinkerLabError):
    pass


class ZeroFieldError(ShrinkerLabError):
    pass


class PreconditionError(ShrinkerLabError):
    """A hypothesis of the underlying inequality is not met by the inputs."""


class RadiusOutOfDomainError(ShrinkerLabError):
    pass


class NonRegularRadiusError(ShrinkerLabError):
    pass


class RhoTooLargeError(ShrinkerLabError):
    pass


class CoreBallError(ShrinkerLabError):
    """A surface that should be a shrinker misses the closed ball of radius sqrt(2n)."""


class InfeasibleBoundaryError(ShrinkerLabError):
    pass


class DimensionMismatchError(ShrinkerLabError):
    pass


class NoFiringRadiusError(ShrinkerLabError):
    pass


class MeshFormatError(ShrinkerLabError):
    """Malformed mesh file; ``lineno`` is the 1-based offending line."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
