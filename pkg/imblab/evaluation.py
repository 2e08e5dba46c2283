"""
Feature sets, contiguous cross-validation and forecast scores.

Three feature groups are compared when forecasting a 5-minute target:

- X1, the realized PV, wind and consumption of the current half-hour;
- X2, the target itself 5 to 60 minutes earlier;
- X3, the target 23 to 25 hours earlier, plus day-ahead forecasts.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from imblab.errors import EvaluationError
from imblab.hgbr import DEFAULT_TAUS, FeatureMatrix, GbtConfig, QuantileSuite, fit_quantile_suite, quantile_name
from imblab.timeseries import (
    FIVE_MINUTES,
    SCHEMA_VERSION,
    TIMESTAMP_FORMAT,
    BalancingDataset,
    TimeSeries,
    derive,
    hold,
    on_common_grid,
)

logger = logging.getLogger(__name__)

Target = Literal["imbalance", "open_loop_ace"]

SOURCES = ("pv", "wind", "load")


def _minutes(first: int, last: int, step: int = 5) -> List[int]:
    return list(range(first, last + 1, step))


class FeatureSetSpec(BaseModel):
    """
    Which features to build for forecasting a 5-minute target.

    :param include_realizations:
        add the observed PV, wind and consumption of the current half-hour (X1)

    :param recent_lags:
        lags of the target in minutes, 5 to 60 for X2

    :param day_ahead_lags:
        lags of the target in minutes, 1380 to 1500 for X3

    :param include_day_ahead_forecasts:
        add the day-ahead PV, wind and consumption forecasts (X3)

    :param include_intraday_forecasts:
        add the forecasts issued one hour ahead
    """

    name: str = "custom"
    include_realizations: bool = False
    recent_lags: List[int] = []
    day_ahead_lags: List[int] = []
    include_day_ahead_forecasts: bool = False
    include_intraday_forecasts: bool = False

    @field_validator("recent_lags", "day_ahead_lags", mode="after")
    @classmethod
    def lags_positive(cls, value: List[int]) -> List[int]:
        """Verify every lag reaches into the past."""
        if any(lag <= 0 for lag in value):
            raise ValueError("Lags must be positive numbers of minutes.")
        return value

    @model_validator(mode="after")
    def has_features(self) -> FeatureSetSpec:
        """Verify at least one feature is requested."""
        if not (
            self.include_realizations
            or self.recent_lags
            or self.day_ahead_lags
            or self.include_day_ahead_forecasts
            or self.include_intraday_forecasts
        ):
            raise ValueError(f"Feature set '{self.name}' requests no features.")
        return self

    @classmethod
    def x1(cls) -> FeatureSetSpec:
        """Get the realized PV, wind and consumption."""
        return cls(name="X1", include_realizations=True)

    @classmethod
    def x2(cls, max_lag_minutes: int = 60) -> FeatureSetSpec:
        """Get target lags from 5 minutes up to ``max_lag_minutes`` in 5-minute steps."""
        return cls(name="X2", recent_lags=_minutes(5, max_lag_minutes))

    @classmethod
    def x3(cls) -> FeatureSetSpec:
        """Get target lags from 23 to 25 hours in 5-minute steps, and day-ahead forecasts."""
        return cls(
            name="X3", day_ahead_lags=_minutes(23 * 60, 25 * 60), include_day_ahead_forecasts=True
        )

    @classmethod
    def from_expression(cls, expression: str) -> FeatureSetSpec:
        """
        Combine preset feature groups named like ``X1+X2+X3``.

        >>> FeatureSetSpec.from_expression("X2+X3").name
        'X2+X3'
        """
        presets = {"X1": cls.x1, "X2": cls.x2, "X3": cls.x3}
        parts = [part.strip().upper() for part in expression.split("+")]
        unknown = [part for part in parts if part not in presets]
        if unknown or not parts:
            raise EvaluationError(
                f"Unknown feature groups {unknown} in '{expression}'; use X1, X2 and X3."
            )
        combined = presets[parts[0]]()
        for part in parts[1:]:
            combined = combined.combine(presets[part]())
        return combined

    def combine(self, other: FeatureSetSpec) -> FeatureSetSpec:
        """Make a feature set with the features of both."""
        return FeatureSetSpec(
            name=f"{self.name}+{other.name}",
            include_realizations=self.include_realizations or other.include_realizations,
            recent_lags=sorted(set(self.recent_lags) | set(other.recent_lags)),
            day_ahead_lags=sorted(set(self.day_ahead_lags) | set(other.day_ahead_lags)),
            include_day_ahead_forecasts=self.include_day_ahead_forecasts
            or other.include_day_ahead_forecasts,
            include_intraday_forecasts=self.include_intraday_forecasts
            or other.include_intraday_forecasts,
        )

    def lags(self) -> List[int]:
        """Get every requested lag in minutes, in increasing order."""
        return sorted(set(self.recent_lags) | set(self.day_ahead_lags))

    def column_names(self) -> List[str]:
        """Get the names of the feature columns, in matrix order."""
        names = []
        if self.include_realizations:
            names += [f"{source}_obs" for source in SOURCES]
        names += [f"lag_{lag}m" for lag in self.lags()]
        if self.include_day_ahead_forecasts:
            names += [f"{source}_fc_da" for source in SOURCES]
        if self.include_intraday_forecasts:
            names += [f"{source}_fc_1h" for source in SOURCES]
        return names


class TrainingTable(BaseModel):
    """
    Feature rows and target values on the 5-minute grid.

    :param dropped_rows:
        rows removed because the target or a requested lag was missing
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: FeatureMatrix
    target: np.ndarray
    timestamps: np.ndarray
    dropped_rows: int
    target_label: str

    def __len__(self) -> int:
        return len(self.target)


def target_series(dataset: BalancingDataset, target: Target) -> TimeSeries:
    """Get the 5-minute open-loop ACE or system imbalance of a dataset."""
    ol_ace, imbalance = derive(dataset)
    if target == "imbalance":
        return imbalance
    if target == "open_loop_ace":
        return ol_ace
    raise EvaluationError(f"Unknown target '{target}'; use 'imbalance' or 'open_loop_ace'.")


def lagged(s: TimeSeries, minutes: int) -> TimeSeries:
    """
    Shift a series later in time, so each reading holds the value from ``minutes`` before.

    The first readings, which have no history, are missing.
    """
    seconds = minutes * 60
    if seconds % s.step:
        raise EvaluationError(
            f"Lag of {minutes} minutes is not a multiple of the {s.step} s step of '{s.label}'."
        )
    shift = seconds // s.step
    values = np.full(len(s), np.nan)
    values[shift:] = s.values[: max(0, len(s) - shift)]
    return s.with_values(values, label=f"lag_{minutes}m")


def build_features(
    dataset: BalancingDataset, target: Target, spec: FeatureSetSpec
) -> TrainingTable:
    """
    Build the feature matrix and target vector for one feature set.

    Half-hourly observations and forecasts are held constant over the six
    5-minute rows of their half-hour. Lag columns are pure shifts of the
    target, so no feature looks at a reading later than its row's
    timestamp minus the lag.

    :raises EvaluationError:
        if a lag doesn't fit the 5-minute grid, or every row lacks the
        target or a requested lag
    """
    y = target_series(dataset, target)
    if y.step != FIVE_MINUTES:
        raise EvaluationError(f"Target '{y.label}' must have a 5-minute step.")

    columns: List[TimeSeries] = []
    if spec.include_realizations:
        columns += [hold(getattr(dataset, f"{source}_obs"), FIVE_MINUTES) for source in SOURCES]
    columns += [lagged(y, lag) for lag in spec.lags()]
    if spec.include_day_ahead_forecasts:
        columns += [hold(getattr(dataset, f"{source}_fc_da"), FIVE_MINUTES) for source in SOURCES]
    if spec.include_intraday_forecasts:
        columns += [hold(getattr(dataset, f"{source}_fc_1h"), FIVE_MINUTES) for source in SOURCES]

    start, step, arrays = on_common_grid(y, *columns)
    target_values, features = arrays[0], np.column_stack(arrays[1:])
    lag_positions = [
        i for i, name in enumerate(spec.column_names()) if name.startswith("lag_")
    ]
    keep = ~np.isnan(target_values)
    if lag_positions:
        keep &= ~np.isnan(features[:, lag_positions]).any(axis=1)
    dropped = int((~keep).sum())
    if not keep.any():
        raise EvaluationError(
            f"No row of '{y.label}' has the history needed for feature set '{spec.name}'."
        )
    if dropped:
        logger.info("%s / %s: dropped %d of %d rows", y.label, spec.name, dropped, len(keep))

    timestamps = (
        np.datetime64(start.replace(tzinfo=None), "s")
        + np.arange(len(keep)) * np.timedelta64(step, "s")
    )[keep]
    return TrainingTable(
        matrix=FeatureMatrix(
            columns=spec.column_names(), values=features[keep], row_timestamps=timestamps
        ),
        target=target_values[keep],
        timestamps=timestamps,
        dropped_rows=dropped,
        target_label=y.label,
    )


def kfold_contiguous(n: int, k: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Split ``range(n)`` into ``k`` contiguous test blocks.

    Block sizes differ by at most one. Each training set is everything
    outside its test block, so it can lie on both sides of it.

    >>> [test.tolist() for _, test in kfold_contiguous(6, 3)]
    [[0, 1], [2, 3], [4, 5]]
    """
    if k < 2:
        raise EvaluationError("Cross-validation needs at least 2 folds.")
    if k > n:
        raise EvaluationError(f"Can't split {n} samples into {k} folds.")
    indices = np.arange(n)
    blocks = np.array_split(indices, k)
    return [(np.setdiff1d(indices, block, assume_unique=True), block) for block in blocks]


def _paired(y: Sequence[float], y_hat: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    observed = np.asarray(y, dtype=np.float64)
    predicted = np.asarray(y_hat, dtype=np.float64)
    if observed.shape != predicted.shape:
        raise EvaluationError(
            f"Can't score {len(predicted)} predictions against {len(observed)} observations."
        )
    if not observed.size:
        raise EvaluationError("Can't score an empty set of predictions.")
    return observed, predicted


def mae(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """
    Get the mean absolute error.

    >>> mae([0, 0], [3, -3])
    3.0
    """
    observed, predicted = _paired(y, y_hat)
    return float(np.mean(np.abs(observed - predicted)))


def rmse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Get the root mean square error."""
    observed, predicted = _paired(y, y_hat)
    return float(np.sqrt(np.mean((observed - predicted) ** 2)))


def pinball(y: Sequence[float], y_hat: Sequence[float], tau: float) -> float:
    """
    Get the mean pinball loss of predictions of the ``tau``-quantile.

    Under-predictions cost ``tau`` per MW, over-predictions ``1 - tau``.

    >>> pinball([10], [6], 0.5)
    2.0
    """
    if not 0 < tau < 1:
        raise EvaluationError(f"Quantile level {tau} must be in (0, 1).")
    observed, predicted = _paired(y, y_hat)
    residual = observed - predicted
    return float(np.mean(np.where(residual >= 0, tau * residual, (1 - tau) * -residual)))


def coverage(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Get the share of observations below their predicted quantile."""
    observed, predicted = _paired(y, y_hat)
    return float(np.mean(observed < predicted))


def metric_names(taus: Sequence[float] = DEFAULT_TAUS) -> List[str]:
    """List the report metrics, in table order."""
    names = ["mae_ls", "mae_ts", "rmse_ls", "rmse_ts"]
    for tau in taus:
        names += [f"pl_{quantile_name(tau)}_ls", f"pl_{quantile_name(tau)}_ts"]
    return names


def score(
    suite: QuantileSuite, m: FeatureMatrix, y: np.ndarray, suffix: Literal["ls", "ts"]
) -> Dict[str, float]:
    """
    Score a model suite on one set of rows.

    :param suffix:
        ``ls`` for the learning set, ``ts`` for the test set
    """
    predictions = suite.predict(m)
    scores = {
        f"mae_{suffix}": mae(y, predictions["mean"]),
        f"rmse_{suffix}": rmse(y, predictions["mean"]),
    }
    for model in suite.quantiles:
        name = model.config.name
        scores[f"pl_{name}_{suffix}"] = pinball(y, predictions[name], model.config.tau)
        scores[f"cov_{name}_{suffix}"] = coverage(y, predictions[name])
    return scores


def prediction_trace(table: TrainingTable, suite: QuantileSuite, rows: np.ndarray) -> pd.DataFrame:
    """
    Get the observed target next to every model's prediction, one row per timestamp.

    :param rows:
        positions in ``table`` to include, e.g. a test block
    """
    m = table.matrix.take(rows)
    frame = pd.DataFrame(
        {
            "timestamp": pd.DatetimeIndex(table.timestamps[rows]).strftime(TIMESTAMP_FORMAT),
            "observed": table.target[rows],
        }
    )
    for name, values in suite.predict(m).items():
        frame[name] = values
    return frame


class FoldScores(BaseModel):
    """Scores of one feature set on one cross-validation fold."""

    combo: str
    fold: int
    train_rows: int
    test_rows: int
    metrics: Dict[str, float]


class CvReport(BaseModel):
    """
    Cross-validation scores of several feature sets.

    :param folds:
        scores of every feature set on every fold, ordered by feature set
        then fold

    :param averaged:
        the arithmetic mean of each metric over the folds, per feature set
    """

    schema_version: str = SCHEMA_VERSION
    target: str
    k: int
    taus: List[float]
    combos: List[str]
    folds: List[FoldScores]
    averaged: Dict[str, Dict[str, float]]

    _traces: Dict[str, pd.DataFrame] = PrivateAttr(default_factory=dict)

    @classmethod
    def from_folds(
        cls, target: str, k: int, taus: Sequence[float], combos: Sequence[str], folds: List[FoldScores]
    ) -> CvReport:
        """Make a report, averaging the fold scores of each feature set."""
        averaged = {}
        for combo in combos:
            scores = [item.metrics for item in folds if item.combo == combo]
            averaged[combo] = {
                metric: float(np.mean([fold_scores[metric] for fold_scores in scores]))
                for metric in scores[0]
            }
        return cls(
            target=target, k=k, taus=list(taus), combos=list(combos), folds=folds, averaged=averaged
        )

    def table(self) -> pd.DataFrame:
        """Get averaged metrics as rows and feature sets as columns."""
        names = metric_names(self.taus)
        return pd.DataFrame(
            {combo: [self.averaged[combo][name] for name in names] for combo in self.combos},
            index=pd.Index(names, name="metric"),
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        """Write the averaged table to a CSV file."""
        self.table().to_csv(path, lineterminator="\n")

    def traces(self) -> Dict[str, pd.DataFrame]:
        """Get the prediction traces kept during cross-validation, keyed by feature set."""
        return dict(self._traces)


def _run_fold(
    table: TrainingTable,
    combo: str,
    fold: int,
    train: np.ndarray,
    test: np.ndarray,
    cfg: GbtConfig,
    taus: Sequence[float],
) -> Tuple[FoldScores, QuantileSuite]:
    logger.info("%s fold %d: training on %d rows", combo, fold + 1, len(train))
    train_matrix = table.matrix.take(train)
    test_matrix = table.matrix.take(test)
    suite = fit_quantile_suite(train_matrix, table.target[train], cfg, taus)
    crossing = suite.crossing_rate(test_matrix)
    if crossing:
        logger.warning(
            "%s fold %d: outer quantiles cross on %.2f%% of test rows",
            combo,
            fold + 1,
            100 * crossing,
        )
    metrics = {
        **score(suite, train_matrix, table.target[train], "ls"),
        **score(suite, test_matrix, table.target[test], "ts"),
    }
    return (
        FoldScores(
            combo=combo, fold=fold, train_rows=len(train), test_rows=len(test), metrics=metrics
        ),
        suite,
    )


def cross_validate(
    dataset: BalancingDataset,
    target: Target,
    feature_combos: Sequence[FeatureSetSpec],
    cfg: GbtConfig,
    k: int = 4,
    taus: Sequence[float] = DEFAULT_TAUS,
    threads: int = 1,
    trace_fold: Optional[int] = None,
) -> CvReport:
    """
    Score each feature set by contiguous k-fold cross-validation.

    For every feature set and fold, a mean model and one quantile model per
    level are fitted on the training rows, then scored on both the training
    rows (LS) and the test block (TS).

    :param threads:
        folds fitted at the same time; results don't depend on it

    :param trace_fold:
        if given, keep a prediction trace of this fold's test block for each
        feature set, available from :meth:`CvReport.traces`
    """
    if not feature_combos:
        raise EvaluationError("No feature sets to cross-validate.")
    names = [combo.name for combo in feature_combos]
    if len(set(names)) != len(names):
        raise EvaluationError(f"Feature set names {names} are not unique.")
    if trace_fold is not None and not 0 <= trace_fold < k:
        raise EvaluationError(f"Fold {trace_fold} doesn't exist among {k} folds.")

    tables = {combo.name: build_features(dataset, target, combo) for combo in feature_combos}
    jobs = []
    for name, table in tables.items():
        for fold, (train, test) in enumerate(kfold_contiguous(len(table), k)):
            jobs.append((name, fold, train, test))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = {
            (name, fold): executor.submit(
                _run_fold, tables[name], name, fold, train, test, cfg, taus
            )
            for name, fold, train, test in jobs
        }
        results = {key: future.result() for key, future in futures.items()}

    folds = [results[(name, fold)][0] for name in names for fold in range(k)]
    report = CvReport.from_folds(
        target=tables[names[0]].target_label, k=k, taus=sorted(taus), combos=names, folds=folds
    )
    if trace_fold is not None:
        for name, fold, _, test in jobs:
            if fold == trace_fold:
                suite = results[(name, fold)][1]
                report._traces[name] = prediction_trace(tables[name], suite, test)
    return report
