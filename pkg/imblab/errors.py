"""Exceptions raised by imblab."""

from __future__ import annotations

from typing import Optional


class ImblabError(Exception):
    """Base class for errors in balancing-data processing."""

    pass


class TimeSeriesError(ImblabError):
    """Exception for series that can't be combined, resampled or aligned as requested."""

    pass


class CsvFormatError(TimeSeriesError):
    """
    Exception for a CSV file that doesn't follow the time series format.

    :param row:
        1-based number of the offending data row (the header is not counted)

    :param column:
        name of the offending column, if the problem is in a single cell
    """

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[str] = None
    ) -> None:
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class DistributionError(ImblabError):
    """Exception for statistics that can't be computed from the given samples."""

    pass


class AcfError(ImblabError):
    """Exception for series whose autocorrelation can't be estimated."""

    pass


class BoostingError(ImblabError):
    """Exception for failing to fit or apply a gradient-boosted tree model."""

    pass


class EvaluationError(ImblabError):
    """Exception for feature sets or validation splits that can't be built."""

    pass


class SizingError(ImblabError):
    """Exception for reserve sizing inputs that are invalid or inconsistent."""

    pass
