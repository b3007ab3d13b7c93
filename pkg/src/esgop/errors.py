"""Exception types shared across the package."""


class EsgopError(Exception):
    """Base class for all package errors."""


class ShapeError(EsgopError, ValueError):
    """An array has the wrong shape, or violates a structural requirement."""


class DataError(EsgopError, ValueError):
    """Input data contains NaN/Inf or otherwise invalid values."""


class ParameterError(EsgopError, ValueError):
    """A scalar parameter is outside its valid range."""


class ConfigError(EsgopError, ValueError):
    """An estimator configuration violates a documented constraint."""


class SupportError(EsgopError, ValueError):
    """A point lies outside the support of the design distribution."""


class PartitionError(EsgopError, ValueError):
    """The dataset is too small for the requested partition scheme."""


class CapabilityError(EsgopError, ValueError):
    """The operation needs information this object does not carry."""


class ConditioningError(EsgopError, ValueError):
    """A linear system is singular or too ill-conditioned to solve."""


class EstimationError(EsgopError, ValueError):
    """A fitted auxiliary quantity is degenerate."""


class ParseError(EsgopError, ValueError):
    """A data file could not be parsed; the message pinpoints the location."""
