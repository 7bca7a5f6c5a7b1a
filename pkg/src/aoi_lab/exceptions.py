"""Exception types raised across the package."""


class AoILabError(Exception):
    """Base class for all package errors."""


class ParameterError(AoILabError, ValueError):
    """An argument is outside its valid domain."""


class SchemaError(AoILabError, ValueError):
    """A serialized scenario or checkpoint does not match the expected layout."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class InfeasibleError(AoILabError):
    """The instance admits no feasible hovering point (e.g. SNR threshold unreachable)."""


class DimensionError(AoILabError, ValueError):
    """Operand shapes are incompatible."""


class NumericalError(AoILabError, ArithmeticError):
    """A loss or gradient became NaN or infinite."""
