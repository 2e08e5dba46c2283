"""
Uniformly sampled MW series and the balancing quantities derived from them.

Open-loop ACE is the area control error minus automatic FRR activations, and
system imbalance is open-loop ACE minus balancing-mechanism and TERRE
activations. Upward activations are positive, so a positive imbalance means
a production surplus.
"""

from __future__ import annotations

import logging
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from ranges import Range, RangeSet

from imblab.errors import CsvFormatError, TimeSeriesError

logger = logging.getLogger(__name__)

MISSING = float("nan")
"""Marker for a missing reading."""

SCHEMA_VERSION = "1"
"""Version of the JSON layout of reports and models."""

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

FIVE_MINUTES = 300
HALF_HOUR = 1800


def as_utc(value: Union[str, datetime, pd.Timestamp, np.datetime64]) -> datetime:
    """
    Convert a timestamp to a timezone-aware UTC datetime.

    Naive timestamps are taken to be in UTC already.

    >>> as_utc("2022-05-01T00:30:00Z").isoformat()
    '2022-05-01T00:30:00+00:00'
    """
    if isinstance(value, (str, np.datetime64)):
        value = pd.Timestamp(value)
    if isinstance(value, pd.Timestamp):
        value = value.to_pydatetime()
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


class TimeWindow(BaseModel):
    """
    A half-open interval of time, from ``start`` up to but excluding ``end``.

    :param start:
        the first instant included in the window

    :param end:
        the first instant after the window
    """

    start: datetime
    end: datetime

    @field_validator("start", "end", mode="before")
    @classmethod
    def in_utc(cls, value: Union[str, datetime]) -> datetime:
        """Store both bounds as UTC datetimes."""
        return as_utc(value)

    @model_validator(mode="after")
    def start_before_end(self) -> TimeWindow:
        """Verify the window isn't empty."""
        if self.end <= self.start:
            raise ValueError("End of a time window must be after its start.")
        return self

    @classmethod
    def from_range(cls, span: Range) -> TimeWindow:
        """Make TimeWindow with same extent as a Range object from python-ranges."""
        return cls(start=span.start, end=span.end)

    def range(self) -> Range:
        """Get the window as a python-ranges Range."""
        return Range(start=self.start, end=self.end)

    def rangeset(self) -> RangeSet:
        """Get the range set of the window."""
        return RangeSet([self.range()])

    @property
    def duration(self) -> timedelta:
        """Get the length of the window."""
        return self.end - self.start

    def __contains__(self, moment: Union[str, datetime]) -> bool:
        return as_utc(moment) in self.range()

    def __and__(self, other: TimeWindow) -> Optional[TimeWindow]:
        """
        Make a new window covering the time shared by self and other.

        :returns:
            the overlap, or None if the windows don't overlap
        """
        overlap: RangeSet = self.rangeset() & other.rangeset()
        if not overlap:
            return None
        span = overlap.ranges()[0]
        if span.end <= span.start:
            return None
        return TimeWindow.from_range(span)


class TimeSeries(BaseModel):
    """
    A uniformly sampled series of MW readings.

    Timestamps are implicit: reading ``i`` belongs to ``start + i * step``.
    Missing readings are stored as NaN and never interpolated. The values
    array is read-only, so a series can be shared freely.

    :param start:
        UTC timestamp of the first reading

    :param step:
        sampling interval in seconds

    :param values:
        the readings, with ``None`` or NaN for a missing reading

    :param label:
        name of the quantity, used as the column name in CSV files
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    start: datetime
    step: int
    values: np.ndarray
    label: str

    @field_validator("start", mode="before")
    @classmethod
    def start_in_utc(cls, value: Union[str, datetime]) -> datetime:
        """Store the start as a UTC datetime."""
        return as_utc(value)

    @field_validator("step", mode="before")
    @classmethod
    def step_in_seconds(cls, value: Union[int, timedelta]) -> int:
        """Accept the step as a timedelta or a number of seconds."""
        if isinstance(value, timedelta):
            if value % timedelta(seconds=1):
                raise ValueError("Step must be a whole number of seconds.")
            return value // timedelta(seconds=1)
        return value

    @field_validator("step", mode="after")
    @classmethod
    def step_is_positive(cls, value: int) -> int:
        """Verify the sampling interval is positive."""
        if value <= 0:
            raise ValueError("Step of a time series must be positive.")
        return value

    @field_validator("values", mode="before")
    @classmethod
    def values_as_array(cls, value: Iterable[Optional[float]]) -> np.ndarray:
        """Copy readings into a read-only float array, rejecting infinities."""
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1:
            raise ValueError("Values of a time series must be one-dimensional.")
        if np.isinf(array).any():
            raise ValueError("Values of a time series must be finite or missing.")
        array.flags.writeable = False
        return array

    @field_validator("label", mode="after")
    @classmethod
    def label_not_empty(cls, value: str) -> str:
        """Verify the series has a name."""
        if not value.strip():
            raise ValueError("Label of a time series cannot be empty.")
        return value

    def __repr__(self) -> str:
        return (
            f"TimeSeries(label='{self.label}', start='{self.start.strftime(TIMESTAMP_FORMAT)}', "
            f"step={self.step}, n={len(self)})"
        )

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.step == other.step
            and self.label == other.label
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )

    @property
    def end(self) -> datetime:
        """Get the first instant after the last reading's interval."""
        return self.start + timedelta(seconds=self.step * len(self))

    @property
    def missing(self) -> np.ndarray:
        """Get a boolean mask of the missing readings."""
        return np.isnan(self.values)

    def missing_count(self) -> int:
        """Count the missing readings."""
        return int(self.missing.sum())

    def is_complete(self) -> bool:
        """Test if no reading is missing."""
        return not self.missing.any()

    def timestamp(self, index: int) -> datetime:
        """Get the timestamp of reading ``index``."""
        return self.start + timedelta(seconds=self.step * index)

    def timestamps(self) -> pd.DatetimeIndex:
        """Get the timestamps of all readings."""
        return pd.date_range(
            self.start, periods=len(self), freq=pd.Timedelta(seconds=self.step)
        )

    def window(self) -> TimeWindow:
        """Get the time window covered by the series."""
        if not len(self):
            raise TimeSeriesError(f"Series '{self.label}' is empty and covers no time.")
        return TimeWindow(start=self.start, end=self.end)

    def with_values(
        self, values: Iterable[Optional[float]], label: Optional[str] = None
    ) -> TimeSeries:
        """Make a series on the same grid with new readings."""
        return TimeSeries(
            start=self.start, step=self.step, values=values, label=label or self.label
        )

    def relabel(self, label: str) -> TimeSeries:
        """Make a copy of the series with a different label."""
        return self.with_values(self.values, label=label)

    def slice(self, first: int, stop: int) -> TimeSeries:
        """Get the readings with indices in ``[first, stop)`` as a new series."""
        first = max(0, first)
        stop = min(len(self), stop)
        return TimeSeries(
            start=self.timestamp(first),
            step=self.step,
            values=self.values[first:stop],
            label=self.label,
        )

    def crop(self, window: TimeWindow) -> TimeSeries:
        """
        Get the readings that fall inside ``window``.

        :param window:
            the window to keep; its start must lie on the series' time grid
        """
        offset = window.start - self.start
        if offset % timedelta(seconds=self.step):
            raise TimeSeriesError(
                f"Window starting {window.start} is not on the time grid of '{self.label}'."
            )
        first = offset // timedelta(seconds=self.step)
        stop = (window.end - self.start) // timedelta(seconds=self.step)
        return self.slice(first, stop)

    def to_pandas(self) -> pd.Series:
        """Convert to a pandas Series indexed by timestamp."""
        return pd.Series(self.values, index=self.timestamps(), name=self.label)


def common_window(*series: TimeSeries) -> TimeWindow:
    """
    Get the window of time covered by every one of the given series.

    :raises TimeSeriesError:
        if the series don't all overlap
    """
    overlap: RangeSet = RangeSet([series[0].window().range()])
    for other in series[1:]:
        overlap = overlap & other.window().rangeset()
    spans = overlap.ranges() if overlap else []
    if not spans or spans[0].end <= spans[0].start:
        labels = ", ".join(f"'{s.label}'" for s in series)
        raise TimeSeriesError(f"Series {labels} have no time window in common.")
    return TimeWindow.from_range(spans[0])


def on_common_grid(*series: TimeSeries) -> Tuple[datetime, int, List[np.ndarray]]:
    """
    Cut equally spaced series down to the readings they share.

    :returns:
        the first shared timestamp, the step, and one array of readings per series

    :raises TimeSeriesError:
        if the steps differ or the series' grids are offset from each other
    """
    steps = sorted({s.step for s in series})
    if len(steps) > 1:
        labels = ", ".join(f"'{s.label}' ({s.step} s)" for s in series)
        raise TimeSeriesError(f"Step mismatch between series {labels}.")
    step = steps[0]
    window = common_window(*series)
    length = (window.end - window.start) // timedelta(seconds=step)
    arrays = []
    for s in series:
        offset = window.start - s.start
        if offset % timedelta(seconds=step):
            raise TimeSeriesError(
                f"Series '{s.label}' is not on the same time grid as the other series."
            )
        first = offset // timedelta(seconds=step)
        arrays.append(s.values[first : first + length])
    return window.start, step, arrays


def _cell_to_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _parse_numbers(cells: np.ndarray) -> np.ndarray:
    """Convert text cells with correctly rounded parsing; unparsable cells become NaN."""
    try:
        return np.array(cells, dtype=np.float64)
    except ValueError:
        return np.array([_cell_to_float(cell) for cell in cells], dtype=np.float64)


def parse_csv(
    path: Union[str, Path], schema: Optional[Sequence[str]] = None
) -> Dict[str, TimeSeries]:
    """
    Read one TimeSeries per value column of a CSV file.

    The first column holds ISO-8601 UTC timestamps at a uniform spacing, which
    is inferred from the first two rows. Empty cells are missing readings.

    :param path:
        location of the CSV file

    :param schema:
        names of the value columns to read; all columns if omitted

    :returns:
        the series, keyed by column name in file order

    :raises CsvFormatError:
        if timestamps are unparsable, duplicated or unevenly spaced, or if a
        cell holds something other than a finite number
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if frame.shape[1] < 2:
        raise CsvFormatError(f"File {path} has no value columns.")
    if len(frame) < 2:
        raise CsvFormatError(
            f"File {path} needs at least two rows to infer the sampling step."
        )
    time_column = frame.columns[0]
    stamps = pd.to_datetime(
        frame[time_column], utc=True, format="ISO8601", errors="coerce"
    )
    unparsed = np.flatnonzero(stamps.isna().to_numpy())
    if len(unparsed):
        raise CsvFormatError(
            f"Unparsable timestamp '{frame[time_column].iloc[unparsed[0]]}'",
            row=int(unparsed[0]) + 1,
            column=time_column,
        )
    nanos = pd.DatetimeIndex(stamps).asi8
    gaps = np.diff(nanos)
    duplicates = np.flatnonzero(gaps == 0)
    if len(duplicates):
        raise CsvFormatError("Duplicate timestamp", row=int(duplicates[0]) + 2)
    step_nanos = int(gaps[0])
    if step_nanos < 0 or step_nanos % 1_000_000_000:
        raise CsvFormatError(
            "Timestamps must increase by a whole number of seconds", row=2
        )
    uneven = np.flatnonzero(gaps != step_nanos)
    if len(uneven):
        raise CsvFormatError(
            f"Timestamp spacing differs from the {step_nanos // 1_000_000_000} s step",
            row=int(uneven[0]) + 2,
        )

    columns = list(schema) if schema is not None else list(frame.columns[1:])
    absent = [name for name in columns if name not in frame.columns[1:]]
    if absent:
        raise CsvFormatError(f"File {path} lacks the columns {absent}.")

    start = stamps.iloc[0]
    result: Dict[str, TimeSeries] = {}
    for name in columns:
        raw = frame[name]
        blank = (raw.str.strip() == "").to_numpy()
        numbers = _parse_numbers(raw.where(~blank, "nan").to_numpy(dtype=object))
        bad = np.flatnonzero(~blank & ~np.isfinite(numbers))
        if len(bad):
            raise CsvFormatError(
                f"Unparsable number '{raw.iloc[bad[0]]}'", row=int(bad[0]) + 1, column=name
            )
        result[name] = TimeSeries(
            start=start,
            step=step_nanos // 1_000_000_000,
            values=numbers,
            label=name,
        )
    logger.info("Read %d series from %s", len(result), path)
    return result


def write_csv(series: Sequence[TimeSeries], path: Union[str, Path]) -> None:
    """
    Write series on a common time grid to one CSV file.

    Floats are written in their shortest round-trip form, so reading the file
    with :func:`parse_csv` gives back equal series.

    :raises TimeSeriesError:
        if the series don't share start, step and length
    """
    if not series:
        raise TimeSeriesError("No series to write.")
    first = series[0]
    for other in series[1:]:
        if (other.start, other.step, len(other)) != (first.start, first.step, len(first)):
            raise TimeSeriesError(
                f"Series '{other.label}' is not on the same grid as '{first.label}'."
            )
    frame = pd.DataFrame({"timestamp": first.timestamps().strftime(TIMESTAMP_FORMAT)})
    for item in series:
        frame[item.label] = item.values
    frame.to_csv(path, index=False, na_rep="", lineterminator="\n")


def resample(
    s: TimeSeries, target_step: int, agg: Literal["mean", "first"] = "mean"
) -> TimeSeries:
    """
    Aggregate consecutive blocks of readings into a coarser series.

    Each output reading covers ``[t, t + target_step)``. A trailing block
    shorter than ``target_step`` is not emitted.

    :param target_step:
        the new step in seconds, an integer multiple of the current step

    :param agg:
        ``"mean"`` averages the present readings of each block (a block with
        none present is missing); ``"first"`` takes the block's first reading

    >>> series = TimeSeries(start="2022-05-01", step=300, values=[1, 2, 3, 4], label="ace")
    >>> resample(series, 600).values.tolist()
    [1.5, 3.5]
    """
    if target_step <= 0 or target_step % s.step:
        raise TimeSeriesError(
            f"Target step {target_step} s is not a multiple of the {s.step} s step of '{s.label}'."
        )
    if agg not in ("mean", "first"):
        raise TimeSeriesError(f"Unknown aggregation '{agg}'.")
    ratio = target_step // s.step
    if ratio == 1:
        return s
    n_blocks = len(s) // ratio
    blocks = s.values[: n_blocks * ratio].reshape(n_blocks, ratio)
    if agg == "first":
        aggregated = blocks[:, 0]
    else:
        present = ~np.isnan(blocks)
        counts = present.sum(axis=1)
        totals = np.where(present, blocks, 0.0).sum(axis=1)
        aggregated = np.full(n_blocks, MISSING)
        np.divide(totals, counts, out=aggregated, where=counts > 0)
    return TimeSeries(start=s.start, step=target_step, values=aggregated, label=s.label)


def hold(s: TimeSeries, target_step: int) -> TimeSeries:
    """Refine a series by repeating each reading over the finer steps it covers."""
    if target_step <= 0 or s.step % target_step:
        raise TimeSeriesError(
            f"Step {s.step} s of '{s.label}' is not a multiple of {target_step} s."
        )
    repeats = s.step // target_step
    return TimeSeries(
        start=s.start,
        step=target_step,
        values=np.repeat(s.values, repeats),
        label=s.label,
    )


def align_half_hour(s: TimeSeries) -> TimeSeries:
    """
    Take the first 5-minute reading of each half-hour.

    Used to compare a 5-minute series with half-hourly explanatory variables.

    :param s:
        a series at a 5-minute step, starting on a half-hour boundary
    """
    if s.step != FIVE_MINUTES:
        raise TimeSeriesError(
            f"Half-hour alignment needs a 5-minute series, '{s.label}' has a {s.step} s step."
        )
    if s.start.minute % 30 or s.start.second or s.start.microsecond:
        raise TimeSeriesError(
            f"Series '{s.label}' starts at {s.start}, not on a half-hour boundary."
        )
    return resample(s, HALF_HOUR, agg="first")


def open_loop_ace(ace: TimeSeries, afrr: TimeSeries) -> TimeSeries:
    """
    Subtract automatic FRR activations from the ACE.

    >>> ace = TimeSeries(start="2022-05-01", step=300, values=[-100, 300], label="ace")
    >>> afrr = TimeSeries(start="2022-05-01", step=300, values=[50, -50], label="afrr")
    >>> open_loop_ace(ace, afrr).values.tolist()
    [-150.0, 350.0]
    """
    start, step, (ace_values, afrr_values) = on_common_grid(ace, afrr)
    return TimeSeries(
        start=start, step=step, values=ace_values - afrr_values, label="open_loop_ace"
    )


def system_imbalance(
    ol_ace: TimeSeries, bm: TimeSeries, terre: TimeSeries
) -> TimeSeries:
    """Subtract balancing-mechanism and TERRE activations from the open-loop ACE."""
    start, step, (ol_values, bm_values, terre_values) = on_common_grid(ol_ace, bm, terre)
    return TimeSeries(
        start=start,
        step=step,
        values=ol_values - bm_values - terre_values,
        label="system_imbalance",
    )


ROLES = (
    "ace",
    "afrr",
    "bm",
    "terre",
    "pv_obs",
    "wind_obs",
    "load_obs",
    "pv_fc_1h",
    "wind_fc_1h",
    "load_fc_1h",
    "pv_fc_da",
    "wind_fc_da",
    "load_fc_da",
)

FILE_GROUPS = {
    "ace.csv": ("ace", "afrr"),
    "activations.csv": ("bm", "terre"),
    "observations.csv": ("pv_obs", "wind_obs", "load_obs"),
    "forecasts_1h.csv": ("pv_fc_1h", "wind_fc_1h", "load_fc_1h"),
    "forecasts_da.csv": ("pv_fc_da", "wind_fc_da", "load_fc_da"),
}


class BalancingDataset(BaseModel):
    """
    Raw balancing series and the explanatory variables observed alongside them.

    Activation series are signed, with upward activations positive.
    Observations and forecasts are half-hourly; the ``_1h`` forecasts were
    issued one hour before delivery and the ``_da`` forecasts the day before.

    :param pv_capacity:
        installed PV capacity in MW, used for load factors

    :param wind_capacity:
        installed wind capacity in MW
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ace: TimeSeries
    afrr: TimeSeries
    bm: TimeSeries
    terre: TimeSeries
    pv_obs: TimeSeries
    wind_obs: TimeSeries
    load_obs: TimeSeries
    pv_fc_1h: TimeSeries
    wind_fc_1h: TimeSeries
    load_fc_1h: TimeSeries
    pv_fc_da: TimeSeries
    wind_fc_da: TimeSeries
    load_fc_da: TimeSeries
    pv_capacity: float = Field(gt=0)
    wind_capacity: float = Field(gt=0)

    @model_validator(mode="after")
    def series_overlap(self) -> BalancingDataset:
        """Verify that every series shares some time window with the others."""
        try:
            common_window(*self.series().values())
        except TimeSeriesError as error:
            raise ValueError(str(error)) from error
        return self

    def series(self) -> Dict[str, TimeSeries]:
        """Get every series in the dataset, keyed by role."""
        return {role: getattr(self, role) for role in ROLES}

    def overlap(self) -> TimeWindow:
        """Get the window covered by every series."""
        return common_window(*self.series().values())

    def capacity(self, role: str) -> float:
        """Get the installed capacity behind a PV or wind series."""
        if role.startswith("pv"):
            return self.pv_capacity
        if role.startswith("wind"):
            return self.wind_capacity
        raise TimeSeriesError(f"No installed capacity is recorded for '{role}'.")


def to_five_minutes(s: TimeSeries) -> TimeSeries:
    """Average a fine-grained series onto the 5-minute grid."""
    if s.step > FIVE_MINUTES:
        raise TimeSeriesError(
            f"Series '{s.label}' has a {s.step} s step, coarser than 5 minutes."
        )
    return resample(s, FIVE_MINUTES, agg="mean")


def derive(dataset: BalancingDataset) -> Tuple[TimeSeries, TimeSeries]:
    """
    Compute open-loop ACE and system imbalance at a 5-minute step.

    ACE and aFRR are first averaged onto the 5-minute grid of the
    activation series.

    :returns:
        the open-loop ACE and the system imbalance
    """
    ol_ace = open_loop_ace(to_five_minutes(dataset.ace), to_five_minutes(dataset.afrr))
    imbalance = system_imbalance(ol_ace, dataset.bm, dataset.terre)
    return ol_ace, imbalance


def reconstruction_residual(dataset: BalancingDataset) -> float:
    """
    Get the largest relative violation of imbalance + BM + TERRE + aFRR = ACE.

    The violation at each 5-minute step is divided by ``max(|ACE|, 1 MW)``;
    steps with any missing reading are skipped.
    """
    _, imbalance = derive(dataset)
    _, _, (imb, bm, terre, afrr, ace) = on_common_grid(
        imbalance,
        dataset.bm,
        dataset.terre,
        to_five_minutes(dataset.afrr),
        to_five_minutes(dataset.ace),
    )
    relative = np.abs(imb + bm + terre + afrr - ace) / np.maximum(np.abs(ace), 1.0)
    present = relative[~np.isnan(relative)]
    return float(present.max()) if len(present) else 0.0


class SeriesSource(BaseModel):
    """Location of one series: a CSV file and, optionally, the column to read."""

    path: str
    column: Optional[str] = None


class Manifest(BaseModel):
    """
    JSON description of where a dataset's series are stored.

    Each role maps to a CSV path, or to a ``{"path", "column"}`` object when
    the column isn't named after the role. Relative paths are resolved from
    the manifest's directory.
    """

    series: Dict[str, Union[str, SeriesSource]]
    pv_capacity: float = Field(gt=0)
    wind_capacity: float = Field(gt=0)

    @field_validator("series", mode="after")
    @classmethod
    def every_role_present(
        cls, value: Dict[str, Union[str, SeriesSource]]
    ) -> Dict[str, Union[str, SeriesSource]]:
        """Verify the manifest locates every series a dataset needs."""
        absent = [role for role in ROLES if role not in value]
        if absent:
            raise ValueError(f"Manifest lacks the series {absent}.")
        return value

    def source(self, role: str) -> SeriesSource:
        """Get the file and column holding the series for ``role``."""
        entry = self.series[role]
        if isinstance(entry, str):
            return SeriesSource(path=entry, column=role)
        return SeriesSource(path=entry.path, column=entry.column or role)


def load_manifest(path: Union[str, Path]) -> BalancingDataset:
    """Read every series named in a manifest file into a BalancingDataset."""
    path = Path(path)
    try:
        manifest = Manifest.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as error:
        raise TimeSeriesError(f"Manifest {path} not found.") from error
    files: Dict[Path, Dict[str, TimeSeries]] = {}
    loaded: Dict[str, TimeSeries] = {}
    for role in ROLES:
        source = manifest.source(role)
        csv_path = (path.parent / source.path).resolve()
        if csv_path not in files:
            if not csv_path.exists():
                raise TimeSeriesError(f"File {csv_path} named in {path} not found.")
            files[csv_path] = parse_csv(csv_path)
        columns = files[csv_path]
        if source.column not in columns:
            raise TimeSeriesError(f"File {csv_path} has no column '{source.column}'.")
        loaded[role] = columns[source.column].relabel(role)
    return BalancingDataset(
        **loaded,
        pv_capacity=manifest.pv_capacity,
        wind_capacity=manifest.wind_capacity,
    )


def write_manifest(dataset: BalancingDataset, directory: Union[str, Path]) -> Path:
    """
    Write a dataset as CSV files plus a ``manifest.json`` that locates them.

    Related series share a file when they share a time grid.

    :returns:
        path of the manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries: Dict[str, Union[str, SeriesSource]] = {}
    for filename, roles in FILE_GROUPS.items():
        group = [getattr(dataset, role).relabel(role) for role in roles]
        grids = {(s.start, s.step, len(s)) for s in group}
        if len(grids) == 1:
            write_csv(group, directory / filename)
            entries.update({role: filename for role in roles})
        else:
            for item in group:
                write_csv([item], directory / f"{item.label}.csv")
                entries[item.label] = f"{item.label}.csv"
    manifest = Manifest(
        series=entries,
        pv_capacity=dataset.pv_capacity,
        wind_capacity=dataset.wind_capacity,
    )
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return manifest_path

