"""
Distributions of imbalance against explanatory variables.

Targets are compared with half-hourly explanatory variables (load factors,
normalized consumption, forecast errors) by sorting the paired samples into
bins and describing each bin with boxplot statistics and the width
ΔQ = Q99 − Q1.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, field_validator
from ranges import Inf, Range
from scipy import stats

from imblab.errors import DistributionError, TimeSeriesError
from imblab.timeseries import (
    SCHEMA_VERSION,
    BalancingDataset,
    TimeSeries,
    align_half_hour,
    on_common_grid,
)

logger = logging.getLogger(__name__)

LOAD_FACTOR_LIMIT = 1.2
"""Largest load factor accepted, leaving room for lags in the capacity register."""

BOXPLOT_LEVELS = (0.01, 0.25, 0.5, 0.75, 0.99)

DEFAULT_MIN_COUNT = 20


class BinSpec(BaseModel):
    """
    Boundaries of the bins used to group an explanatory variable.

    Bin ``i`` holds values ``x`` with ``edges[i] <= x < edges[i + 1]``; the
    last bin also holds its upper edge.

    :param edges:
        strictly increasing bin boundaries, in units of the explanatory variable

    :param open_ends:
        whether the first and last bins extend to minus and plus infinity
    """

    edges: List[float]
    open_ends: bool = False

    @field_validator("edges", mode="after")
    @classmethod
    def edges_increase(cls, value: List[float]) -> List[float]:
        """Verify there is at least one bin and the edges are in order."""
        if len(value) < 2:
            raise ValueError("A BinSpec needs at least two edges.")
        if not all(np.isfinite(value)):
            raise ValueError("Bin edges must be finite.")
        if any(right <= left for left, right in zip(value, value[1:])):
            raise ValueError("Bin edges must be strictly increasing.")
        return value

    @classmethod
    def uniform(
        cls, lo: float, hi: float, width: float, open_ends: bool = False
    ) -> BinSpec:
        """
        Make bins of equal width covering ``[lo, hi]``.

        >>> BinSpec.uniform(-1000, 1000, 500).edges
        [-1000.0, -500.0, 0.0, 500.0, 1000.0]
        """
        count = int(round((hi - lo) / width))
        return cls(edges=[lo + i * width for i in range(count + 1)], open_ends=open_ends)

    @classmethod
    def load_factor(cls) -> BinSpec:
        """Get bins of width 0.1 for load factors, with the last bin holding 0.5 and above."""
        return cls(edges=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, LOAD_FACTOR_LIMIT])

    @classmethod
    def normalized_consumption(cls) -> BinSpec:
        """Get four bins of equal width over ``[0, 1]``."""
        return cls.uniform(0.0, 1.0, 0.25)

    @classmethod
    def forecast_error(cls) -> BinSpec:
        """Get twelve 500 MW bins over ``[-3000, 3000]``, open at both ends."""
        return cls.uniform(-3000.0, 3000.0, 500.0, open_ends=True)

    @property
    def n_bins(self) -> int:
        """Count the bins."""
        return len(self.edges) - 1

    def ranges(self) -> List[Range]:
        """Get each bin as a python-ranges Range."""
        result = []
        for i, (lo, hi) in enumerate(zip(self.edges, self.edges[1:])):
            first, last = i == 0, i == self.n_bins - 1
            result.append(
                Range(
                    start=-Inf if (first and self.open_ends) else lo,
                    end=Inf if (last and self.open_ends) else hi,
                    include_end=last and not self.open_ends,
                )
            )
        return result

    def assign(self, x: np.ndarray) -> np.ndarray:
        """
        Find the bin of each value.

        :returns:
            the bin index of each value, or -1 for values outside every bin
        """
        x = np.asarray(x, dtype=np.float64)
        index = np.searchsorted(self.edges, x, side="right") - 1
        index[x == self.edges[-1]] = self.n_bins - 1
        if self.open_ends:
            return np.clip(index, 0, self.n_bins - 1)
        index[(index < 0) | (index >= self.n_bins)] = -1
        return index


class BinStatistics(BaseModel):
    """
    Boxplot statistics of the target values falling in one bin.

    Statistics are None for an empty bin.
    """

    label: str
    lo: float
    hi: float
    count: int
    mean: Optional[float] = None
    q01: Optional[float] = None
    q25: Optional[float] = None
    q50: Optional[float] = None
    q75: Optional[float] = None
    q99: Optional[float] = None
    delta_q: Optional[float] = None
    iqr: Optional[float] = None
    low_confidence: bool = False

    @property
    def midpoint(self) -> float:
        """Get the center of the bin."""
        return (self.lo + self.hi) / 2


class BinnedDistributionReport(BaseModel):
    """
    Distribution of a target within each bin of an explanatory variable.

    :param paired_count:
        number of timestamps where both target and explanatory values exist

    :param dropped_missing:
        number of timestamps dropped because either value was missing

    :param out_of_range:
        number of paired samples outside every bin
    """

    schema_version: str = SCHEMA_VERSION
    target_label: str
    explanatory_label: str
    min_count: int
    paired_count: int
    dropped_missing: int
    out_of_range: int
    bins: List[BinStatistics]

    def delta_q(self) -> List[Optional[float]]:
        """List ΔQ for every bin, in bin order."""
        return [item.delta_q for item in self.bins]

    def to_frame(self) -> pd.DataFrame:
        """Get one plot-ready row per bin."""
        return pd.DataFrame(
            [
                {
                    "bin_midpoint": item.midpoint,
                    "count": item.count,
                    "mean": item.mean,
                    "q01": item.q01,
                    "q25": item.q25,
                    "q50": item.q50,
                    "q75": item.q75,
                    "q99": item.q99,
                    "delta_q": item.delta_q,
                    "iqr": item.iqr,
                }
                for item in self.bins
            ]
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        """Write the plot-ready rows to a CSV file."""
        self.to_frame().to_csv(path, index=False, na_rep="", lineterminator="\n")


def quantiles(values: Sequence[float], levels: Sequence[float]) -> np.ndarray:
    """
    Get several quantiles of a sample by linear interpolation.

    With the sample sorted as ``v[0] <= ... <= v[n-1]`` and ``h = (n - 1) * p``,
    the quantile at level ``p`` is ``v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)])``.
    """
    sample = np.asarray(values, dtype=np.float64)
    if sample.size == 0:
        raise DistributionError("Can't take a quantile of an empty sample.")
    if np.isnan(sample).any():
        raise DistributionError("Sample contains missing values; drop them first.")
    levels = np.asarray(levels, dtype=np.float64)
    if ((levels < 0) | (levels > 1)).any():
        raise DistributionError(f"Quantile levels {levels.tolist()} must be within [0, 1].")
    return np.quantile(sample, levels, method="linear")


def quantile(values: Sequence[float], p: float) -> float:
    """
    Get one quantile of a sample by linear interpolation.

    >>> quantile([1, 2, 3, 4], 0.25)
    1.75
    """
    return float(quantiles(values, [p])[0])


def delta_q(values: Sequence[float]) -> float:
    """
    Get the width of a distribution as its 99th minus its 1st percentile.

    >>> delta_q(range(101))
    98.0
    """
    low, high = quantiles(values, [0.01, 0.99])
    return float(high - low)


def forecast_error(forecast: TimeSeries, observation: TimeSeries) -> TimeSeries:
    """
    Subtract the observation from the forecast issued for the same time.

    A positive error means less was observed than forecast.
    """
    start, step, (predicted, observed) = on_common_grid(forecast, observation)
    label = (
        forecast.label.replace("_fc_", "_err_")
        if "_fc_" in forecast.label
        else f"{forecast.label}_error"
    )
    return TimeSeries(start=start, step=step, values=predicted - observed, label=label)


def load_factor(production: TimeSeries, capacity: float) -> TimeSeries:
    """
    Divide production by installed capacity.

    :raises DistributionError:
        if capacity isn't positive, or a load factor is negative or above 1.2
    """
    if capacity <= 0:
        raise DistributionError(f"Installed capacity must be positive, not {capacity}.")
    ratio = production.values / capacity
    invalid = np.flatnonzero((ratio > LOAD_FACTOR_LIMIT) | (ratio < 0))
    if len(invalid):
        index = int(invalid[0])
        raise DistributionError(
            f"Load factor {ratio[index]:.3f} of '{production.label}' at "
            f"{production.timestamp(index)} is outside [0, {LOAD_FACTOR_LIMIT}]."
        )
    label = production.label.removesuffix("_obs") + "_lf"
    return production.with_values(ratio, label=label)


def normalize_minmax(s: TimeSeries) -> TimeSeries:
    """
    Map a series affinely onto ``[0, 1]``, its minimum to 0 and its maximum to 1.

    >>> series = TimeSeries(start="2022-05-01", step=1800, values=[40, 60, 80], label="load_obs")
    >>> normalize_minmax(series).values.tolist()
    [0.0, 0.5, 1.0]
    """
    present = s.values[~s.missing]
    if len(np.unique(present)) < 2:
        raise DistributionError(
            f"Series '{s.label}' needs two distinct values to be normalized."
        )
    low, high = present.min(), present.max()
    label = s.label.removesuffix("_obs") + "_norm"
    return s.with_values((s.values - low) / (high - low), label=label)


def paired_samples(target: TimeSeries, explanatory: TimeSeries) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Get the target and explanatory values recorded at the same timestamps.

    :returns:
        the target values, the explanatory values, and the number of
        timestamps dropped because either value was missing
    """
    try:
        _, _, (y, x) = on_common_grid(target, explanatory)
    except TimeSeriesError as error:
        raise DistributionError(str(error)) from error
    complete = ~(np.isnan(y) | np.isnan(x))
    return y[complete], x[complete], int((~complete).sum())


def _bin_statistics(label: str, lo: float, hi: float, values: np.ndarray, min_count: int) -> BinStatistics:
    if not len(values):
        return BinStatistics(label=label, lo=lo, hi=hi, count=0, low_confidence=True)
    q01, q25, q50, q75, q99 = quantiles(values, BOXPLOT_LEVELS)
    return BinStatistics(
        label=label,
        lo=lo,
        hi=hi,
        count=len(values),
        mean=float(values.mean()),
        q01=q01,
        q25=q25,
        q50=q50,
        q75=q75,
        q99=q99,
        delta_q=q99 - q01,
        iqr=q75 - q25,
        low_confidence=len(values) < min_count,
    )


def binned_boxplot(
    target: TimeSeries,
    explanatory: TimeSeries,
    bins: BinSpec,
    min_count: int = DEFAULT_MIN_COUNT,
) -> BinnedDistributionReport:
    """
    Describe the distribution of the target within each bin of the explanatory variable.

    :param target:
        the series being described, on the same grid as ``explanatory``
        (typically a half-hour-aligned imbalance)

    :param explanatory:
        the series that decides each sample's bin

    :param bins:
        the bin boundaries

    :param min_count:
        bins with fewer samples are flagged as low-confidence

    :raises DistributionError:
        if the two series share no complete samples
    """
    y, x, dropped = paired_samples(target, explanatory)
    if not len(y):
        raise DistributionError(
            f"Series '{target.label}' and '{explanatory.label}' share no complete samples."
        )
    index = bins.assign(x)
    statistics = []
    for number, span in enumerate(bins.ranges()):
        statistics.append(
            _bin_statistics(
                label=str(span),
                lo=bins.edges[number],
                hi=bins.edges[number + 1],
                values=y[index == number],
                min_count=min_count,
            )
        )
    report = BinnedDistributionReport(
        target_label=target.label,
        explanatory_label=explanatory.label,
        min_count=min_count,
        paired_count=len(y),
        dropped_missing=dropped,
        out_of_range=int((index < 0).sum()),
        bins=statistics,
    )
    sparse = [item.label for item in statistics if item.low_confidence]
    if sparse:
        logger.info(
            "%s by %s: bins %s have fewer than %d samples",
            target.label,
            explanatory.label,
            sparse,
            min_count,
        )
    if dropped:
        logger.info("%s by %s: dropped %d incomplete pairs", target.label, explanatory.label, dropped)
    return report


def pearson_corr(a: TimeSeries, b: TimeSeries) -> float:
    """
    Get the sample Pearson correlation of two series over their complete pairs.

    :raises DistributionError:
        if there are fewer than two complete pairs, or either side is constant
    """
    y, x, _ = paired_samples(a, b)
    if len(y) < 2:
        raise DistributionError(
            f"Correlation of '{a.label}' and '{b.label}' needs at least two complete pairs."
        )
    if np.ptp(y) == 0 or np.ptp(x) == 0:
        raise DistributionError(
            f"Correlation of '{a.label}' and '{b.label}' is undefined for a constant series."
        )
    r, _ = stats.pearsonr(y, x)
    return float(np.clip(r, -1.0, 1.0))


Horizon = Literal["1h", "da"]

OBSERVATION_VARIABLES = ("pv_lf", "wind_lf", "load_norm")


def explanatory_series(dataset: BalancingDataset, name: str) -> TimeSeries:
    """
    Build a named explanatory variable from a dataset.

    Names are ``pv_lf``, ``wind_lf``, ``load_norm``, ``<source>_err_<horizon>``
    for ``source`` in pv, wind, load and ``horizon`` in 1h, da, or any role
    of the dataset.
    """
    if name in ("pv_lf", "wind_lf"):
        source = name.split("_")[0]
        return load_factor(getattr(dataset, f"{source}_obs"), dataset.capacity(source))
    if name == "load_norm":
        return normalize_minmax(dataset.load_obs)
    if "_err_" in name:
        source, horizon = name.split("_err_")
        try:
            forecast = getattr(dataset, f"{source}_fc_{horizon}")
            observation = getattr(dataset, f"{source}_obs")
        except AttributeError as error:
            raise DistributionError(f"Unknown forecast error '{name}'.") from error
        return forecast_error(forecast, observation)
    series = dataset.series()
    if name in series:
        return series[name]
    raise DistributionError(f"Unknown explanatory variable '{name}'.")


def default_bins(name: str) -> BinSpec:
    """Get the preset bins for a named explanatory variable."""
    if name.endswith("_lf"):
        return BinSpec.load_factor()
    if name.endswith("_norm"):
        return BinSpec.normalized_consumption()
    if "_err_" in name:
        return BinSpec.forecast_error()
    raise DistributionError(f"No preset bins for '{name}'; give the bin edges explicitly.")


def observation_study(
    dataset: BalancingDataset, target: TimeSeries, min_count: int = DEFAULT_MIN_COUNT
) -> Dict[str, BinnedDistributionReport]:
    """
    Describe a 5-minute target against PV and wind load factors and normalized consumption.

    The target is reduced to the first 5 minutes of each half-hour first.
    """
    aligned = align_half_hour(target)
    return {
        name: binned_boxplot(
            aligned, explanatory_series(dataset, name), default_bins(name), min_count
        )
        for name in OBSERVATION_VARIABLES
    }


def forecast_error_study(
    dataset: BalancingDataset,
    target: TimeSeries,
    horizon: Horizon = "1h",
    min_count: int = DEFAULT_MIN_COUNT,
) -> Dict[str, BinnedDistributionReport]:
    """Describe a 5-minute target against PV, wind and consumption forecast errors."""
    aligned = align_half_hour(target)
    names = [f"{source}_err_{horizon}" for source in ("pv", "wind", "load")]
    return {
        name: binned_boxplot(
            aligned, explanatory_series(dataset, name), default_bins(name), min_count
        )
        for name in names
    }
