"""Command-line interface: ``imblab synth | derive | analyze | acf | train | evaluate | size``."""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type, TypeVar

import click
import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from imblab import autocorr, distributions, evaluation, hgbr, reserves, synthetic
from imblab.errors import ImblabError
from imblab.timeseries import (
    FIVE_MINUTES,
    SCHEMA_VERSION,
    TIMESTAMP_FORMAT,
    BalancingDataset,
    TimeSeries,
    align_half_hour,
    common_window,
    derive,
    load_manifest,
    open_loop_ace,
    parse_csv,
    reconstruction_residual,
    resample,
    write_csv,
)

logger = logging.getLogger(__name__)

TARGETS = click.Choice(["imbalance", "open_loop_ace"])


class DeriveSummary(BaseModel):
    """Check of the derived series against the ACE they were derived from."""

    schema_version: str = SCHEMA_VERSION
    start: str
    rows: int
    reconstruction_residual: float


class CorrelationSummary(BaseModel):
    """Pearson correlation of a target with each explanatory variable."""

    schema_version: str = SCHEMA_VERSION
    target_label: str
    correlations: Dict[str, float]


class ImblabGroup(click.Group):
    """Command group that reports library errors as one JSON line and exit code 1."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (ImblabError, ValidationError, OSError) as error:
            message = " ".join(str(error).split())
            click.echo(json.dumps({"error": type(error).__name__, "message": message}), err=True)
            ctx.exit(1)


def _configure_logging() -> None:
    level = logging.getLevelName(os.environ.get("IMBLAB_LOG", "WARNING").upper())
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _write_json(model: BaseModel, path: Path) -> None:
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    click.echo(str(path))


def _output_dir(out: str) -> Path:
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _floats(value: str) -> List[float]:
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as error:
        raise click.BadParameter(f"'{value}' is not a comma-separated list of numbers.") from error


def _seconds(ctx: click.Context, param: click.Parameter, value: str) -> int:
    try:
        seconds = int(value) if value.isdigit() else pd.Timedelta(value).total_seconds()
    except ValueError as error:
        raise click.BadParameter(f"'{value}' is not a duration like 60s or 5min.") from error
    if seconds <= 0 or seconds != int(seconds):
        raise click.BadParameter(f"'{value}' must be a positive whole number of seconds.")
    return int(seconds)


ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


def _load_config(
    model: Type[ConfigModel], config_file: Optional[str], overrides: Dict[str, Any]
) -> ConfigModel:
    """Read a config model from JSON, then apply the options that were given."""
    settings: Dict[str, Any] = {}
    if config_file:
        loaded = model.model_validate_json(Path(config_file).read_text(encoding="utf-8"))
        settings = loaded.model_dump(exclude_unset=True)
    settings.update({key: value for key, value in overrides.items() if value is not None})
    return model(**settings)


def gbt_options(function):
    """Add the command-line options shared by ``train`` and ``evaluate``."""
    options = [
        click.option("--gbt-config", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file of GbtConfig fields; options below override it."),
        click.option("--learning-rate", type=float),
        click.option("--max-iterations", type=int),
        click.option("--max-leaf-nodes", type=int),
        click.option("--min-samples-leaf", type=int),
        click.option("--max-bins", type=int),
        click.option("--l2-regularization", type=float),
        click.option("--seed", type=int),
        click.option("--taus", default="0.01,0.5,0.99", show_default=True,
                     help="Comma-separated quantile levels."),
    ]
    for option in reversed(options):
        function = option(function)
    return function


manifest_option = click.option(
    "--manifest", required=True, type=click.Path(exists=True, dir_okay=False),
    help="JSON manifest locating the dataset's CSV files.",
)
out_option = click.option("--out", required=True, type=click.Path(file_okay=False),
                          help="Directory for the output files.")
threads_option = click.option(
    "--threads", type=click.IntRange(min=1), default=1, show_default=True,
    help="Most worker threads to use; outputs don't depend on it.",
)


@click.group(cls=ImblabGroup)
def cli() -> None:
    """Analyze, forecast and size balancing reserves for system imbalance."""
    _configure_logging()


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="JSON file of SyntheticConfig fields; options below override it.")
@click.option("--days", type=int)
@click.option("--seed", type=int)
@click.option("--alpha", type=float, help="Share of imbalance offset by BM and TERRE.")
@click.option("--beta", type=float, help="Weight of forecast errors in the imbalance.")
@threads_option
@out_option
def synth(config_file: Optional[str], days: Optional[int], seed: Optional[int],
          alpha: Optional[float], beta: Optional[float], threads: int, out: str) -> None:
    """Generate a synthetic dataset and its manifest. Generation uses one thread."""
    overrides = {"days": days, "seed": seed, "alpha": alpha, "beta": beta}
    dataset = synthetic.generate(
        _load_config(synthetic.SyntheticConfig, config_file, overrides)
    )
    click.echo(str(synthetic.write_dataset(dataset, _output_dir(out))))


@cli.command("derive")
@manifest_option
@threads_option
@out_option
def derive_command(manifest: str, threads: int, out: str) -> None:
    """Write 5-minute open-loop ACE and system imbalance, and check them against ACE."""
    dataset = load_manifest(manifest)
    ol_ace, imbalance = derive(dataset)
    directory = _output_dir(out)
    window = common_window(ol_ace, imbalance)
    write_csv([ol_ace.crop(window), imbalance.crop(window)], directory / "derived.csv")
    click.echo(str(directory / "derived.csv"))
    summary = DeriveSummary(
        start=window.start.strftime(TIMESTAMP_FORMAT),
        rows=len(imbalance.crop(window)),
        reconstruction_residual=reconstruction_residual(dataset),
    )
    _write_json(summary, directory / "derive.json")


@cli.command()
@manifest_option
@click.option("--target", type=TARGETS, default="imbalance", show_default=True)
@click.option("--study", type=click.Choice(["observations", "forecast-errors"]),
              default="observations", show_default=True)
@click.option("--horizon", type=click.Choice(["1h", "da"]), default="1h", show_default=True,
              help="Forecast horizon of the forecast-error study.")
@click.option("--explanatory", multiple=True,
              help="Explanatory variable, e.g. pv_lf or wind_err_da; replaces the study's set.")
@click.option("--edges", help="Comma-separated bin edges for the explanatory variables.")
@click.option("--min-count", type=int, default=distributions.DEFAULT_MIN_COUNT, show_default=True)
@threads_option
@out_option
def analyze(manifest: str, target: str, study: str, horizon: str, explanatory: Sequence[str],
            edges: Optional[str], min_count: int, threads: int, out: str) -> None:
    """Describe the target's distribution in bins of explanatory variables."""
    dataset = load_manifest(manifest)
    series = evaluation.target_series(dataset, target)
    aligned = align_half_hour(series)
    if explanatory:
        reports = {}
        for name in explanatory:
            bins = (
                distributions.BinSpec(edges=_floats(edges))
                if edges
                else distributions.default_bins(name)
            )
            reports[name] = distributions.binned_boxplot(
                aligned, distributions.explanatory_series(dataset, name), bins, min_count
            )
    elif study == "observations":
        reports = distributions.observation_study(dataset, series, min_count)
    else:
        reports = distributions.forecast_error_study(dataset, series, horizon, min_count)

    directory = _output_dir(out)
    correlations = {}
    for name, report in reports.items():
        stem = f"{target}_by_{name}"
        report.write_csv(directory / f"{stem}.csv")
        _write_json(report, directory / f"{stem}.json")
        correlations[name] = distributions.pearson_corr(
            aligned, distributions.explanatory_series(dataset, name)
        )
    _write_json(
        CorrelationSummary(target_label=aligned.label, correlations=correlations),
        directory / f"{target}_correlations.json",
    )


def _acf_series(dataset: BalancingDataset, name: str) -> TimeSeries:
    if name == "open_loop_ace":
        return open_loop_ace(dataset.ace, dataset.afrr)
    if name == "imbalance":
        return derive(dataset)[1]
    series = dataset.series()
    if name not in series:
        raise ImblabError(f"Unknown series '{name}'.")
    return series[name]


@cli.command("acf")
@manifest_option
@click.option("--series", "series_name", default="open_loop_ace", show_default=True,
              help="open_loop_ace, imbalance or a dataset role.")
@click.option("--step", default="60s", show_default=True, callback=_seconds,
              help="Step the series is averaged to before estimating.")
@click.option("--max-lag", type=int, default=2880, show_default=True, help="Largest lag, in steps.")
@click.option("--method", type=click.Choice(["direct", "fft"]), default="direct", show_default=True)
@click.option("--threshold", type=float, default=0.1, show_default=True)
@threads_option
@out_option
def acf_command(manifest: str, series_name: str, step: int, max_lag: int, method: str,
                threshold: float, threads: int, out: str) -> None:
    """Estimate the autocorrelation of a series and list its notable lag groups."""
    dataset = load_manifest(manifest)
    series = resample(_acf_series(dataset, series_name), step)
    result = autocorr.acf(series, max_lag, method=method, threads=threads)
    directory = _output_dir(out)
    result.write_csv(directory / "acf.csv")
    click.echo(str(directory / "acf.csv"))
    _write_json(autocorr.summarize(result, threshold), directory / "acf_summary.json")


@cli.command()
@manifest_option
@click.option("--target", type=TARGETS, default="imbalance", show_default=True)
@click.option("--features", default="X1+X2+X3", show_default=True,
              help="Feature groups joined with '+'.")
@threads_option
@gbt_options
@out_option
def train(manifest: str, target: str, features: str, threads: int, gbt_config: Optional[str],
          taus: str, out: str, **overrides: Any) -> None:
    """Fit a mean model and quantile models on the whole dataset."""
    cfg = _load_config(hgbr.GbtConfig, gbt_config, overrides)
    dataset = load_manifest(manifest)
    table = evaluation.build_features(
        dataset, target, evaluation.FeatureSetSpec.from_expression(features)
    )
    suite = hgbr.fit_quantile_suite(
        table.matrix, table.target, cfg, _floats(taus), threads=threads
    )
    _write_json(suite, _output_dir(out) / "suite.json")


@cli.command()
@manifest_option
@click.option("--target", type=TARGETS, default="imbalance", show_default=True)
@click.option("--combos", default="X1+X2+X3,X2,X3", show_default=True,
              help="Comma-separated feature sets, each made of groups joined with '+'.")
@click.option("--k", type=int, default=4, show_default=True, help="Number of folds.")
@threads_option
@click.option("--trace-fold", type=int,
              help="Write the predictions on this fold's test block (counting from 1).")
@gbt_options
@out_option
def evaluate(manifest: str, target: str, combos: str, k: int, threads: int,
             trace_fold: Optional[int], gbt_config: Optional[str], taus: str, out: str,
             **overrides: Any) -> None:
    """Compare feature sets by contiguous k-fold cross-validation."""
    cfg = _load_config(hgbr.GbtConfig, gbt_config, overrides)
    specs = [
        evaluation.FeatureSetSpec.from_expression(item)
        for item in combos.split(",")
        if item.strip()
    ]
    dataset = load_manifest(manifest)
    report = evaluation.cross_validate(
        dataset,
        target,
        specs,
        cfg,
        k=k,
        taus=_floats(taus),
        threads=threads,
        trace_fold=None if trace_fold is None else trace_fold - 1,
    )
    directory = _output_dir(out)
    _write_json(report, directory / "cv_report.json")
    report.write_csv(directory / "cv_table.csv")
    for name, frame in report.traces().items():
        path = directory / f"trace_{name.replace('+', '_')}.csv"
        frame.to_csv(path, index=False, lineterminator="\n")


def _prediction_series(table: evaluation.TrainingTable, values: np.ndarray, label: str) -> TimeSeries:
    """Spread predictions for the kept rows of a table onto the full 5-minute grid."""
    offsets = (table.timestamps - table.timestamps[0]) // np.timedelta64(FIVE_MINUTES, "s")
    grid = np.full(int(offsets[-1]) + 1, np.nan)
    grid[offsets.astype(np.intp)] = values
    return TimeSeries(start=table.timestamps[0], step=FIVE_MINUTES, values=grid, label=label)


@cli.command()
@manifest_option
@click.option("--method", type=click.Choice(["convolution", "predicted-quantiles"]),
              default="convolution", show_default=True)
@click.option("--risk", type=float, default=0.01, show_default=True)
@click.option("--horizon", type=click.Choice(["1h", "da"]), default="da", show_default=True,
              help="Forecast horizon whose errors are convolved.")
@click.option("--grid-step", type=float, default=reserves.DEFAULT_GRID_STEP, show_default=True)
@click.option("--unit-errors", type=click.Path(exists=True, dir_okay=False),
              help="CSV of conventional-unit error samples in MW, convolved as one more source.")
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False),
              help="Model suite from 'imblab train', for predicted quantiles.")
@click.option("--target", type=TARGETS, default="imbalance", show_default=True)
@click.option("--features", default="X1+X2+X3", show_default=True,
              help="Feature groups the model suite was trained on.")
@threads_option
@out_option
def size(manifest: str, method: str, risk: float, horizon: str, grid_step: float,
         unit_errors: Optional[str], model_file: Optional[str], target: str, features: str,
         threads: int, out: str) -> None:
    """Size upward and downward reserves at a risk level."""
    dataset = load_manifest(manifest)
    directory = _output_dir(out)
    if method == "convolution":
        samples = reserves.forecast_error_samples(dataset, horizon)
        units = None
        if unit_errors:
            column = next(iter(parse_csv(unit_errors).values()))
            units = column.values[~column.missing]
        requirement = reserves.combined_error_margin(samples, risk, grid_step, units)
        arrays = list(samples.values()) + ([] if units is None else [units])
        report = reserves.summarize([requirement], reserves.inputs_digest(*arrays))
    else:
        if not model_file:
            raise click.UsageError("--model is required for predicted-quantiles sizing.")
        suite = hgbr.QuantileSuite.model_validate_json(Path(model_file).read_text(encoding="utf-8"))
        table = evaluation.build_features(
            dataset, target, evaluation.FeatureSetSpec.from_expression(features)
        )
        low = _prediction_series(table, suite.model_for(risk).predict(table.matrix), "q_low")
        high = _prediction_series(table, suite.model_for(1 - risk).predict(table.matrix), "q_high")
        schedule = reserves.size_from_predicted_quantiles(low, high, risk)
        reserves.write_schedule(schedule, directory / "schedule.csv")
        click.echo(str(directory / "schedule.csv"))
        report = reserves.summarize(schedule, reserves.inputs_digest(low.values, high.values))
    _write_json(report, directory / "sizing.json")


def main() -> None:
    """Run the ``imblab`` command."""
    cli(prog_name="imblab")
