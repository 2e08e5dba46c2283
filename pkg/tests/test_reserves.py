from datetime import timedelta

import numpy as np
import pytest
from pydantic import ValidationError

from imblab.errors import SizingError
from imblab.reserves import (
    DiscreteDistribution,
    ReserveRequirement,
    SizingReport,
    combined_error_distribution,
    combined_error_margin,
    convolve,
    empirical_to_discrete,
    forecast_error_samples,
    inputs_digest,
    margin_from_distribution,
    size_from_predicted_quantiles,
    summarize,
    write_schedule,
)


@pytest.fixture(scope="module")
def gaussian_errors():
    rng = np.random.default_rng(7)
    return {
        "pv": rng.normal(0, 100, size=1_000_000),
        "wind": rng.normal(0, 100, size=1_000_000),
    }


def uniform_three(step=1.0):
    return DiscreteDistribution(grid_origin=-step, grid_step=step, probabilities=[1 / 3] * 3)


class TestDiscreteDistribution:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution(grid_origin=0, grid_step=1, probabilities=[0.5, 0.4])

    def test_negative_probability(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution(grid_origin=0, grid_step=1, probabilities=[1.5, -0.5])

    def test_step_must_be_positive(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution(grid_origin=0, grid_step=0, probabilities=[1.0])

    def test_support_and_mean(self):
        d = DiscreteDistribution(grid_origin=-10, grid_step=10, probabilities=[0.25, 0.25, 0.5])
        assert d.support().tolist() == [-10.0, 0.0, 10.0]
        assert d.mean() == pytest.approx(2.5)
        assert d.cdf(0) == pytest.approx(0.5)

    def test_lower_quantile(self):
        d = DiscreteDistribution(grid_origin=0, grid_step=1, probabilities=[0.5, 0.5])
        assert d.quantile(0.5) == 0.0
        assert d.quantile(0.51) == 1.0
        assert d.quantile(0) == 0.0
        assert d.quantile(1) == 1.0

    def test_quantile_out_of_range(self):
        with pytest.raises(SizingError):
            DiscreteDistribution.point_mass(0).quantile(1.5)


class TestDiscretization:
    def test_rounds_to_grid(self):
        d = empirical_to_discrete([4, 6, 14, 16, -6], grid_step=10)
        assert d.grid_origin == -10
        assert d.probabilities.tolist() == pytest.approx([0.2, 0.2, 0.4, 0.2])

    def test_mass_preserved(self):
        rng = np.random.default_rng(0)
        d = empirical_to_discrete(rng.normal(0, 300, size=5000), grid_step=10)
        assert d.probabilities.sum() == pytest.approx(1.0)

    def test_no_samples(self):
        with pytest.raises(SizingError):
            empirical_to_discrete([])

    def test_missing_samples(self):
        with pytest.raises(SizingError):
            empirical_to_discrete([1.0, np.nan])


class TestConvolution:
    def test_triangular(self):
        d = convolve(uniform_three(), uniform_three())
        assert d.grid_origin == -2
        assert d.probabilities == pytest.approx(np.array([1, 2, 3, 2, 1]) / 9, abs=1e-15)

    def test_point_mass_shifts(self):
        d = uniform_three(step=10)
        shifted = convolve(d, DiscreteDistribution.point_mass(30, grid_step=10))
        assert shifted.probabilities == pytest.approx(d.probabilities)
        assert shifted.grid_origin == 20

    def test_mass_and_mean_preserved(self):
        rng = np.random.default_rng(1)
        a = empirical_to_discrete(rng.normal(50, 200, size=2000), grid_step=10)
        b = empirical_to_discrete(rng.exponential(100, size=2000), grid_step=10)
        combined = convolve(a, b)
        assert combined.probabilities.sum() == pytest.approx(1.0)
        assert combined.mean() == pytest.approx(a.mean() + b.mean())

    def test_step_mismatch(self):
        with pytest.raises(SizingError):
            convolve(uniform_three(step=1), uniform_three(step=10))

    def test_gaussian_sum(self, gaussian_errors):
        combined = combined_error_distribution(gaussian_errors, grid_step=10)
        oracle = np.quantile(gaussian_errors["pv"] + gaussian_errors["wind"], 0.99)
        assert oracle == pytest.approx(329, abs=5)
        assert combined.quantile(0.99) == pytest.approx(oracle, abs=20)


class TestStaticMargins:
    def test_largest_unit(self):
        d = DiscreteDistribution(grid_origin=-1500, grid_step=10, probabilities=[0.02] + [0] * 149 + [0.98])
        requirement = margin_from_distribution(d, 0.01)
        assert requirement.upward_mw == 1500
        assert requirement.downward_mw == 0
        assert requirement.method == "convolution"

    def test_monotone_in_risk(self, gaussian_errors):
        margins = [
            combined_error_margin(gaussian_errors, risk, grid_step=10)
            for risk in (0.001, 0.01, 0.05)
        ]
        ups = [item.upward_mw for item in margins]
        downs = [item.downward_mw for item in margins]
        assert ups[0] >= ups[1] >= ups[2] > 0
        assert downs[0] >= downs[1] >= downs[2] > 0

    def test_unit_outages_raise_upward_margin(self):
        rng = np.random.default_rng(2)
        errors = {"load": rng.normal(0, 100, size=10000)}
        outages = np.where(rng.uniform(size=10000) < 0.02, -1000.0, 0.0)
        without = combined_error_margin(errors, 0.01)
        with_units = combined_error_margin(errors, 0.01, unit_errors=outages)
        assert with_units.upward_mw > without.upward_mw + 500
        assert with_units.downward_mw == pytest.approx(without.downward_mw, abs=20)

    @pytest.mark.parametrize("risk", [0, 0.5, 0.7])
    def test_invalid_risk(self, risk):
        with pytest.raises(SizingError):
            margin_from_distribution(DiscreteDistribution.point_mass(0), risk)

    def test_requirement_validates_risk(self):
        with pytest.raises(ValidationError):
            ReserveRequirement(upward_mw=1, downward_mw=1, risk_level=0.6, method="convolution")

    def test_forecast_errors_from_dataset(self, small_dataset):
        samples = forecast_error_samples(small_dataset, "da")
        assert list(samples) == ["pv", "wind", "load"]
        assert len(samples["load"]) == 10 * 48
        requirement = combined_error_margin(samples, 0.01)
        assert requirement.upward_mw > 0
        assert requirement.downward_mw > 0


class TestPredictedQuantiles:
    def test_direct_mapping(self, make_series):
        low = make_series([-800, -200], step=300, label="q01")
        high = make_series([600, 100], step=300, label="q99")
        first, second = size_from_predicted_quantiles(low, high, 0.01)
        assert (first.upward_mw, first.downward_mw) == (800, 600)
        assert (second.upward_mw, second.downward_mw) == (200, 100)
        assert first.valid_for.duration == timedelta(minutes=5)
        assert first.method == "predicted_quantiles"

    def test_crossed_quantiles_clamped(self, make_series):
        low = make_series([100], step=300, label="q01")
        high = make_series([50], step=300, label="q99")
        (requirement,) = size_from_predicted_quantiles(low, high, 0.01)
        assert requirement.upward_mw == 0
        assert requirement.downward_mw == 75

    def test_missing_steps_skipped(self, make_series):
        low = make_series([-100, None, -300], step=300, label="q01")
        high = make_series([100, 200, None], step=300, label="q99")
        requirements = size_from_predicted_quantiles(low, high, 0.01)
        assert len(requirements) == 1

    def test_misaligned_grids(self, make_series):
        low = make_series([-100, -200], step=300, label="q01")
        high = make_series([100, 200], step=300, label="q99", start="2022-05-01T00:01:00Z")
        with pytest.raises(SizingError):
            size_from_predicted_quantiles(low, high, 0.01)

    def test_summary_and_schedule(self, make_series, tmp_path):
        low = make_series([-800, -200, -500], step=300, label="q01")
        high = make_series([600, 100, 900], step=300, label="q99")
        requirements = size_from_predicted_quantiles(low, high, 0.01)
        report = summarize(requirements, inputs_digest(low.values, high.values))
        assert (report.upward_mw, report.downward_mw) == (800, 900)
        assert report.steps == 3
        assert report.window.duration == timedelta(minutes=15)
        loaded = SizingReport.model_validate_json(report.model_dump_json())
        assert loaded == report

        write_schedule(requirements, tmp_path / "schedule.csv")
        lines = (tmp_path / "schedule.csv").read_text().splitlines()
        assert lines[0] == "timestamp,upward_mw,downward_mw"
        assert lines[1] == "2022-05-01T00:00:00Z,800.0,600.0"

    def test_nothing_to_summarize(self):
        with pytest.raises(SizingError):
            summarize([], inputs_digest([]))


class TestDigest:
    def test_depends_on_values_and_order(self):
        assert inputs_digest([1, 2], [3]) == inputs_digest([1, 2], [3])
        assert inputs_digest([1, 2], [3]) != inputs_digest([1], [2, 3])
        assert inputs_digest([1, 2]) != inputs_digest([2, 1])
