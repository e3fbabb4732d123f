"""Exception hierarchy shared across the package."""


class QuantError(Exception):
    """Base class for all errors raised by ocquant."""


class InvalidArgumentError(QuantError, ValueError):
    """An argument violates a documented precondition."""


class SchemaError(QuantError):
    """CSV columns do not match the declared schema."""


class ParseError(QuantError):
    """A CSV cell could not be parsed as a finite number."""

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message)
        self.row = row


class EmptyDatasetError(QuantError):
    """A dataset file holds no data rows."""


class InsufficientDataError(QuantError, ValueError):
    """Too few rows to fit a model."""


class InfeasibleSampleError(QuantError):
    """A sampling request cannot be met by the candidate pool."""


class DegenerateRatesError(QuantError, ValueError):
    """TPR does not exceed FPR, so the ACC adjustment is undefined."""


class UnsupportedModeError(QuantError):
    """A transductive estimator was asked to produce a reusable model."""


class ConfigError(QuantError):
    """A run configuration document is malformed."""
