"""Autocorrelation of a complete, evenly sampled series."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy import fft

from imblab.errors import AcfError
from imblab.timeseries import SCHEMA_VERSION, TimeSeries

logger = logging.getLogger(__name__)


class AcfResult(BaseModel):
    """
    Autocorrelation of a series at lags ``0, 1, ..., max_lag`` steps.

    :param step:
        seconds between consecutive lags

    :param n:
        number of readings the estimate is based on
    """

    schema_version: str = SCHEMA_VERSION
    label: str
    step: int
    n: int
    values: List[float]

    @property
    def max_lag(self) -> int:
        """Get the largest lag, in steps."""
        return len(self.values) - 1

    @property
    def lags(self) -> List[int]:
        """Get the lags, in steps."""
        return list(range(len(self.values)))

    def to_frame(self) -> pd.DataFrame:
        """Get one plot-ready row per lag."""
        return pd.DataFrame(
            {
                "lag": self.lags,
                "lag_seconds": [lag * self.step for lag in self.lags],
                "acf": self.values,
            }
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        """Write the lags and correlations to a CSV file."""
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


class LagGroup(BaseModel):
    """A run of consecutive lags whose correlation stays above a threshold."""

    first_lag: int
    last_lag: int
    peak_lag: int
    peak_value: float


class AcfSummary(BaseModel):
    """Lag groups with notable correlation, for reporting next to the full ACF."""

    schema_version: str = SCHEMA_VERSION
    label: str
    step: int
    n: int
    max_lag: int
    threshold: float
    groups: List[LagGroup]


def _direct(deviations: np.ndarray, max_lag: int, threads: int) -> np.ndarray:
    n = len(deviations)

    def covariances(lags: np.ndarray) -> List[float]:
        return [float((deviations[: n - k] * deviations[k:]).sum()) for k in lags]

    chunks = [chunk for chunk in np.array_split(np.arange(1, max_lag + 1), threads) if len(chunk)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        parts = list(executor.map(covariances, chunks))
    return np.array([float((deviations * deviations).sum())] + [c for part in parts for c in part])


def _fft(deviations: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(deviations)
    size = fft.next_fast_len(2 * n - 1, real=True)
    spectrum = fft.rfft(deviations, size)
    return fft.irfft(spectrum * np.conj(spectrum), size)[: max_lag + 1]


def acf(
    s: TimeSeries,
    max_lag: int,
    method: Literal["direct", "fft"] = "direct",
    threads: int = 1,
) -> AcfResult:
    """
    Estimate the autocorrelation of a series.

    Uses the biased estimator with the mean of the whole series:
    ``rho(k) = sum_t (v[t] - m)(v[t + k] - m) / sum_t (v[t] - m) ** 2``,
    which keeps every value within ``[-1, 1]``.

    :param s:
        a series without missing readings

    :param max_lag:
        the largest lag, in steps of the series

    :param method:
        ``"direct"`` sums each lag's products, ``"fft"`` goes through the
        power spectrum; both agree to about 1e-12

    :param threads:
        workers sharing the lags of the direct method; the result doesn't
        depend on their number

    :raises AcfError:
        if readings are missing, the series is constant, or ``max_lag`` leaves
        fewer than two pairs
    """
    if not s.is_complete():
        raise AcfError(
            f"Series '{s.label}' has {s.missing_count()} missing readings; resample or trim it first."
        )
    n = len(s)
    if max_lag < 0 or max_lag >= n - 1:
        raise AcfError(f"Lag {max_lag} is out of range for a series of {n} readings.")
    deviations = s.values - s.values.mean()
    if not deviations.any():
        raise AcfError(f"Autocorrelation of constant series '{s.label}' is undefined.")
    if method == "direct":
        covariance = _direct(deviations, max_lag, max(1, threads))
    elif method == "fft":
        covariance = _fft(deviations, max_lag)
    else:
        raise AcfError(f"Unknown autocorrelation method '{method}'.")
    values = np.clip(covariance / covariance[0], -1.0, 1.0)
    values[0] = 1.0
    logger.debug("ACF of %s: %d lags over %d readings", s.label, max_lag, n)
    return AcfResult(label=s.label, step=s.step, n=n, values=values.tolist())


def significant_lags(result: AcfResult, threshold: float = 0.1) -> List[int]:
    """List the nonzero lags whose correlation reaches ``threshold`` in absolute value."""
    return [
        lag for lag, value in enumerate(result.values) if lag and abs(value) >= threshold
    ]


def peak_groups(result: AcfResult, threshold: float = 0.1) -> List[LagGroup]:
    """
    Group consecutive significant lags and find the peak of each group.

    >>> result = AcfResult(label="x", step=60, n=100, values=[1.0, 0.5, 0.2, 0.0, 0.3, 0.05])
    >>> [(g.first_lag, g.last_lag, g.peak_lag) for g in peak_groups(result)]
    [(1, 2, 1), (4, 4, 4)]
    """
    groups: List[LagGroup] = []
    run: List[int] = []
    for lag in significant_lags(result, threshold) + [-1]:
        if run and lag != run[-1] + 1:
            peak = max(run, key=lambda k: abs(result.values[k]))
            groups.append(
                LagGroup(
                    first_lag=run[0],
                    last_lag=run[-1],
                    peak_lag=peak,
                    peak_value=result.values[peak],
                )
            )
            run = []
        run.append(lag)
    return groups


def summarize(result: AcfResult, threshold: float = 0.1) -> AcfSummary:
    """Collect the notable lag groups of an autocorrelation estimate."""
    return AcfSummary(
        label=result.label,
        step=result.step,
        n=result.n,
        max_lag=result.max_lag,
        threshold=threshold,
        groups=peak_groups(result, threshold),
    )
