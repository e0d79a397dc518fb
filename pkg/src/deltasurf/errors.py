"""Exception types raised across the package."""


class DeltaSurfError(Exception):
    """Base class for all package errors."""


class DegenerateMetric(DeltaSurfError):
    """The surface metric is not positive definite at some node."""


class InjectivityViolation(DeltaSurfError):
    """The layer map (s, u) -> gamma(s) + u n(s) fails to be a diffeomorphism."""


class ConjugatePoint(DeltaSurfError):
    """The Jacobi field vanishes at a positive geodesic radius."""


class NoBoundState(DeltaSurfError):
    """A transverse operator has no negative eigenvalue."""


class ValidityViolation(DeltaSurfError):
    """An asserted inequality fails on the sampled parameter range."""


class NoConvergence(DeltaSurfError):
    """An iterative solver hit its iteration cap."""


class DropPoint(DeltaSurfError):
    """A sweep point cannot be evaluated and is removed from the report."""


class InsufficientData(DeltaSurfError):
    """Too few valid points for the requested fit."""


class ConfigError(DeltaSurfError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class PipelineError(DeltaSurfError):
    """A pipeline stage failed; ``point`` carries the parameter point."""

    def __init__(self, message: str, point: object = None):
        super().__init__(f"{message} (at {point})" if point is not None else message)
        self.point = point
