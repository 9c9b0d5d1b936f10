"""Exception hierarchy for the forecasting engine."""

from typing import Optional


class ThinMarketError(Exception):
    """Base class for every error raised by this package."""


class DataFormatError(ThinMarketError):
    """Raised when an input CSV violates its schema."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class WindowError(ThinMarketError):
    """Raised when a requested window exits the bounds of a series."""


class InsufficientHistoryError(ThinMarketError):
    """Raised when a model is asked to fit or forecast on too little data."""


class FitError(ThinMarketError):
    """Raised when an estimator cannot produce a valid model."""


class DegenerateInputError(FitError):
    """Raised for zero-variance or otherwise degenerate training data."""


class PlanError(ThinMarketError):
    """Raised for invalid plan or simulator configuration files."""


class AllModelsFailedError(ThinMarketError):
    """Raised when every model in a backtest fails on the same day."""
