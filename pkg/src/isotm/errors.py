"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for every error raised by isotm."""


class DomainError(GeometryError):
    """A point (or a finite-difference stencil point) left the chart domain."""


class SingularMetricError(GeometryError):
    pass


class DegeneratePlaneError(GeometryError):
    pass


class ParameterError(GeometryError):
    pass


class PointMismatchError(GeometryError):
    pass


class NotUnitFiberError(GeometryError):
    pass


class NotUnitFieldError(GeometryError):
    pass


class NotParallelError(GeometryError):
    pass


class NotOrthogonalError(GeometryError):
    pass


class NotRadialError(GeometryError):
    pass


class SigmaNotZeroError(GeometryError):
    pass


class JetRequiredError(GeometryError):
    pass


class JetMismatchError(GeometryError):
    """Analytic derivatives disagree with central differences."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class ConfigError(GeometryError):
    """Invalid scenario file. ``field`` names the offending key path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
