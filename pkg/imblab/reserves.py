"""
Sizing of upward and downward balancing reserves.

Two methods are offered. The static method treats the forecast errors of
PV, wind, consumption (and optionally conventional units) as independent,
convolves their distributions and reads the margins at a risk level. The
dynamic method reads the margins of each time step from predicted extreme
quantiles of the imbalance.

Signs follow the imbalance convention: a negative value is a deficit and
calls for upward reserve.
"""

from __future__ import annotations

import hashlib
import logging
from functools import reduce
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from imblab.distributions import Horizon, forecast_error
from imblab.errors import SizingError, TimeSeriesError
from imblab.timeseries import (
    SCHEMA_VERSION,
    TIMESTAMP_FORMAT,
    BalancingDataset,
    TimeSeries,
    TimeWindow,
    on_common_grid,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 10.0
"""Grid spacing of discrete error distributions, in MW."""

PROBABILITY_TOLERANCE = 1e-9

SizingMethod = Literal["convolution", "predicted_quantiles"]


class DiscreteDistribution(BaseModel):
    """
    Probabilities of values on an evenly spaced grid of MW.

    Point ``i`` of the grid is ``grid_origin + i * grid_step``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid_origin: float
    grid_step: float = Field(gt=0)
    probabilities: np.ndarray

    @field_validator("probabilities", mode="before")
    @classmethod
    def probabilities_valid(cls, value: Sequence[float]) -> np.ndarray:
        """Verify the probabilities are non-negative and sum to 1."""
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or not array.size:
            raise ValueError("A distribution needs a non-empty list of probabilities.")
        if not np.isfinite(array).all() or (array < 0).any():
            raise ValueError("Probabilities must be finite and non-negative.")
        if abs(array.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Probabilities sum to {array.sum()!r}, not 1.")
        array.flags.writeable = False
        return array

    @classmethod
    def point_mass(cls, value: float, grid_step: float = DEFAULT_GRID_STEP) -> DiscreteDistribution:
        """Make a distribution with all its mass at one value."""
        return cls(grid_origin=value, grid_step=grid_step, probabilities=[1.0])

    def support(self) -> np.ndarray:
        """Get the grid points, including those with zero probability."""
        return self.grid_origin + self.grid_step * np.arange(len(self.probabilities))

    def mean(self) -> float:
        """Get the expected value."""
        return float(np.dot(self.probabilities, self.support()))

    def cdf(self, x: float) -> float:
        """Get the probability of a value no greater than ``x``."""
        return float(self.probabilities[self.support() <= x].sum())

    def quantile(self, p: float) -> float:
        """
        Get the smallest grid point whose cumulative probability reaches ``p``.

        >>> DiscreteDistribution(grid_origin=-1, grid_step=1, probabilities=[0.25, 0.5, 0.25]).quantile(0.5)
        0.0
        """
        if not 0 <= p <= 1:
            raise SizingError(f"Probability {p} must be within [0, 1].")
        cumulative = np.cumsum(self.probabilities)
        # rounding in the cumulative sum shouldn't skip a grid point
        index = int(np.searchsorted(cumulative, p - 1e-12, side="left"))
        return float(self.support()[min(index, len(cumulative) - 1)])


class ReserveRequirement(BaseModel):
    """
    Reserve margins that leave a given risk of an uncovered imbalance.

    :param risk_level:
        probability of a deficit beyond ``upward_mw``, and likewise of a
        surplus beyond ``downward_mw``

    :param valid_for:
        the time the requirement applies to, or None for a static requirement
    """

    upward_mw: float = Field(ge=0)
    downward_mw: float = Field(ge=0)
    risk_level: float
    method: SizingMethod
    valid_for: Optional[TimeWindow] = None

    @field_validator("risk_level", mode="after")
    @classmethod
    def risk_in_range(cls, value: float) -> float:
        """Verify 0 < risk_level < 0.5."""
        if not 0 < value < 0.5:
            raise ValueError("Risk level must be in (0, 0.5).")
        return value


class SizingReport(BaseModel):
    """
    Summary of a sizing run.

    For a time-varying requirement the margins are the largest over all steps.

    :param inputs_digest:
        SHA-256 of the input samples, to tell reports on different data apart
    """

    schema_version: str = SCHEMA_VERSION
    method: SizingMethod
    risk: float
    upward_mw: float = Field(ge=0)
    downward_mw: float = Field(ge=0)
    window: Optional[TimeWindow] = None
    steps: int = 1
    inputs_digest: str


def _check_risk(risk: float) -> None:
    if not 0 < risk < 0.5:
        raise SizingError(f"Risk level {risk} must be in (0, 0.5).")


def inputs_digest(*arrays: Sequence[float]) -> str:
    """Hash the values of several arrays, in order."""
    digest = hashlib.sha256()
    for values in arrays:
        array = np.ascontiguousarray(values, dtype=np.float64)
        digest.update(len(array).to_bytes(8, "little"))
        digest.update(array.tobytes())
    return digest.hexdigest()


def empirical_to_discrete(
    samples: Sequence[float], grid_step: float = DEFAULT_GRID_STEP
) -> DiscreteDistribution:
    """
    Make a discrete distribution from samples, each rounded to the nearest grid point.

    Grid points are multiples of ``grid_step`` and span the rounded samples.

    >>> empirical_to_discrete([-1, 1], grid_step=1).probabilities.tolist()
    [0.5, 0.0, 0.5]
    """
    values = np.asarray(samples, dtype=np.float64)
    if not values.size:
        raise SizingError("Can't make a distribution from no samples.")
    if not np.isfinite(values).all():
        raise SizingError("Samples must be finite; drop missing values first.")
    if grid_step <= 0:
        raise SizingError(f"Grid step {grid_step} must be positive.")
    points = np.floor(values / grid_step + 0.5).astype(np.int64)
    lowest = int(points.min())
    counts = np.bincount(points - lowest)
    return DiscreteDistribution(
        grid_origin=lowest * grid_step,
        grid_step=grid_step,
        probabilities=counts / counts.sum(),
    )


def convolve(a: DiscreteDistribution, b: DiscreteDistribution) -> DiscreteDistribution:
    """
    Get the distribution of the sum of two independent variables.

    :raises SizingError:
        if the two grids have different steps
    """
    if not np.isclose(a.grid_step, b.grid_step, rtol=1e-12, atol=0):
        raise SizingError(
            f"Can't convolve distributions with grid steps {a.grid_step} and {b.grid_step}."
        )
    probabilities = np.convolve(a.probabilities, b.probabilities)
    return DiscreteDistribution(
        grid_origin=a.grid_origin + b.grid_origin,
        grid_step=a.grid_step,
        probabilities=np.clip(probabilities, 0, None),
    )


def margin_from_distribution(
    d: DiscreteDistribution, risk: float, valid_for: Optional[TimeWindow] = None
) -> ReserveRequirement:
    """
    Read reserve margins from a distribution of imbalance or combined forecast error.

    The upward margin covers deficits down to the ``risk`` quantile, the
    downward margin surpluses up to the ``1 - risk`` quantile.
    """
    _check_risk(risk)
    return ReserveRequirement(
        upward_mw=max(0.0, -d.quantile(risk)),
        downward_mw=max(0.0, d.quantile(1 - risk)),
        risk_level=risk,
        method="convolution",
        valid_for=valid_for,
    )


def forecast_error_samples(dataset: BalancingDataset, horizon: Horizon = "da") -> Dict[str, np.ndarray]:
    """
    Get the complete PV, wind and consumption forecast errors, with imbalance signs.

    Less production or more consumption than forecast is a deficit, so
    production errors are negated.
    """
    samples = {}
    for source, sign in (("pv", -1.0), ("wind", -1.0), ("load", 1.0)):
        error = forecast_error(
            getattr(dataset, f"{source}_fc_{horizon}"), getattr(dataset, f"{source}_obs")
        )
        present = error.values[~error.missing]
        samples[source] = sign * present
    return samples


def combined_error_distribution(
    samples: Dict[str, Sequence[float]], grid_step: float = DEFAULT_GRID_STEP
) -> DiscreteDistribution:
    """Convolve the discretized distributions of independent error sources."""
    if not samples:
        raise SizingError("No error sources to combine.")
    distributions = [empirical_to_discrete(values, grid_step) for values in samples.values()]
    return reduce(convolve, distributions)


def combined_error_margin(
    samples: Dict[str, Sequence[float]],
    risk: float,
    grid_step: float = DEFAULT_GRID_STEP,
    unit_errors: Optional[Sequence[float]] = None,
) -> ReserveRequirement:
    """
    Size static reserves from independent error sources.

    :param samples:
        error samples per source, in imbalance signs

    :param unit_errors:
        optional error samples of conventional units, e.g. outages as
        negative MW, treated as one more independent source
    """
    sources = dict(samples)
    if unit_errors is not None:
        sources["units"] = unit_errors
    combined = combined_error_distribution(sources, grid_step)
    requirement = margin_from_distribution(combined, risk)
    logger.info(
        "Combined %s: mean %.1f MW, margins up %.0f / down %.0f MW at risk %g",
        list(sources),
        combined.mean(),
        requirement.upward_mw,
        requirement.downward_mw,
        risk,
    )
    return requirement


def size_from_predicted_quantiles(
    q_low: TimeSeries, q_high: TimeSeries, risk: float
) -> List[ReserveRequirement]:
    """
    Size reserves for each time step from predicted low and high quantiles of imbalance.

    Where the low prediction exceeds the high one, both are replaced by their
    midpoint. Steps where either prediction is missing are skipped.

    :param risk:
        the quantile level of ``q_low``; ``q_high`` should be at ``1 - risk``
    """
    _check_risk(risk)
    try:
        start, step, (low, high) = on_common_grid(q_low, q_high)
    except TimeSeriesError as error:
        raise SizingError(str(error)) from error
    present = ~(np.isnan(low) | np.isnan(high))
    crossed = present & (low > high)
    midpoint = (low + high) / 2
    low = np.where(crossed, midpoint, low)
    high = np.where(crossed, midpoint, high)
    if crossed.any():
        logger.warning(
            "Predicted quantiles cross at %d of %d steps; clamped to their midpoint",
            int(crossed.sum()),
            int(present.sum()),
        )
    grid = TimeSeries(start=start, step=step, values=low, label="q_low")
    requirements = []
    for index in np.flatnonzero(present):
        moment = grid.timestamp(int(index))
        requirements.append(
            ReserveRequirement(
                upward_mw=max(0.0, -float(low[index])),
                downward_mw=max(0.0, float(high[index])),
                risk_level=risk,
                method="predicted_quantiles",
                valid_for=TimeWindow(start=moment, end=grid.timestamp(int(index) + 1)),
            )
        )
    return requirements


def schedule_frame(requirements: Sequence[ReserveRequirement]) -> pd.DataFrame:
    """Get one row per time-varying requirement, ready for a CSV file."""
    return pd.DataFrame(
        {
            "timestamp": [item.valid_for.start.strftime(TIMESTAMP_FORMAT) for item in requirements],
            "upward_mw": [item.upward_mw for item in requirements],
            "downward_mw": [item.downward_mw for item in requirements],
        }
    )


def write_schedule(requirements: Sequence[ReserveRequirement], path: Union[str, Path]) -> None:
    """Write time-varying requirements to a CSV file."""
    schedule_frame(requirements).to_csv(path, index=False, lineterminator="\n")


def summarize(
    requirements: Sequence[ReserveRequirement], digest: str
) -> SizingReport:
    """
    Summarize one or more requirements of the same method and risk.

    :raises SizingError:
        if there are no requirements
    """
    if not requirements:
        raise SizingError("No requirements to summarize; every step had a missing prediction.")
    first = requirements[0]
    windows = [item.valid_for for item in requirements if item.valid_for is not None]
    window = None
    if windows:
        window = TimeWindow(
            start=min(item.start for item in windows), end=max(item.end for item in windows)
        )
    return SizingReport(
        method=first.method,
        risk=first.risk_level,
        upward_mw=max(item.upward_mw for item in requirements),
        downward_mw=max(item.downward_mw for item in requirements),
        window=window,
        steps=len(requirements),
        inputs_digest=digest,
    )
