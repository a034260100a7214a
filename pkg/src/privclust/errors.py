"""Exception types raised across the package."""


class PrivclustError(Exception):
    """Base class for all package errors."""


class ParseError(PrivclustError, ValueError):
    """Malformed input file."""


class ConfigError(PrivclustError, ValueError):
    """Invalid configuration value."""


class ParameterError(PrivclustError, ValueError):
    """Invalid numeric parameter passed to an operation."""


class DomainError(PrivclustError, ValueError):
    """Value outside its feature's state domain."""


class StateError(PrivclustError, RuntimeError):
    """Operation called on data in the wrong state (e.g. not discretized)."""


class EstimationError(PrivclustError, ArithmeticError):
    """Frequency estimation is impossible for the given mechanism."""


class UndefinedMetricError(PrivclustError, ValueError):
    """Metric is undefined for the given clustering."""


class SelectionError(PrivclustError, RuntimeError):
    """No candidate could be scored."""


class ProtocolError(PrivclustError, RuntimeError):
    """Protocol step failed; ``step`` names the failing stage."""

    def __init__(self, message, step=None):
        super().__init__(f"[{step}] {message}" if step else message)
        self.step = step


class ShareError(ProtocolError):
    """An owner would share zero rows."""
