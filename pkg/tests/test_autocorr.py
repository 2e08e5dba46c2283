import numpy as np
import pytest

from imblab.autocorr import AcfResult, acf, peak_groups, significant_lags, summarize
from imblab.errors import AcfError
from imblab.timeseries import TimeSeries, open_loop_ace


def direct_oracle(values, max_lag):
    """Autocorrelation by one explicit sum per lag."""
    d = np.asarray(values) - np.mean(values)
    denominator = np.sum(d * d)
    return [np.sum(d[: len(d) - k] * d[k:]) / denominator for k in range(max_lag + 1)]


@pytest.fixture(scope="module")
def noisy_series():
    rng = np.random.default_rng(5)
    values = np.cumsum(rng.normal(size=5000)) + rng.normal(size=5000) * 10
    return TimeSeries(start="2022-05-01", step=60, values=values, label="ol")


class TestAcf:
    def test_lag_zero_is_one(self, noisy_series):
        result = acf(noisy_series, 10)
        assert result.values[0] == 1.0
        assert len(result.values) == 11

    def test_matches_direct_oracle(self, noisy_series):
        result = acf(noisy_series, 200)
        assert result.values == pytest.approx(direct_oracle(noisy_series.values, 200), abs=1e-9)

    def test_fft_matches_direct(self, noisy_series):
        direct = acf(noisy_series, 300)
        fast = acf(noisy_series, 300, method="fft")
        assert fast.values == pytest.approx(direct.values, abs=1e-9)

    def test_same_for_any_thread_count(self, noisy_series):
        single = acf(noisy_series, 100, threads=1)
        several = acf(noisy_series, 100, threads=4)
        assert single.values == several.values

    def test_values_bounded(self, noisy_series):
        result = acf(noisy_series, 1000)
        assert max(abs(value) for value in result.values) <= 1.0

    def test_alternating_series(self):
        series = TimeSeries(start="2022-05-01", step=60, values=[1, -1] * 50, label="x")
        result = acf(series, 2)
        assert result.values[1] == pytest.approx(-0.99)
        assert result.values[2] == pytest.approx(0.98)

    def test_missing_values(self):
        series = TimeSeries(start="2022-05-01", step=60, values=[1, None, 3, 4], label="x")
        with pytest.raises(AcfError):
            acf(series, 1)

    def test_lag_too_large(self):
        series = TimeSeries(start="2022-05-01", step=60, values=[1, 2, 3, 4], label="x")
        with pytest.raises(AcfError):
            acf(series, 3)

    def test_constant_series(self):
        series = TimeSeries(start="2022-05-01", step=60, values=[2.0] * 10, label="x")
        with pytest.raises(AcfError):
            acf(series, 2)

    def test_unknown_method(self, noisy_series):
        with pytest.raises(AcfError):
            acf(noisy_series, 2, method="wavelet")

    def test_csv_rows(self, noisy_series, tmp_path):
        acf(noisy_series, 50).write_csv(tmp_path / "acf.csv")
        lines = (tmp_path / "acf.csv").read_text().splitlines()
        assert lines[0] == "lag,lag_seconds,acf"
        assert len(lines) == 52
        assert lines[2].startswith("1,60,")


class TestLagGroups:
    def test_significant_lags(self):
        result = AcfResult(label="x", step=60, n=100, values=[1.0, 0.5, -0.2, 0.05, 0.1])
        assert significant_lags(result, 0.1) == [1, 2, 4]

    def test_groups_and_peaks(self):
        result = AcfResult(label="x", step=60, n=100, values=[1.0, 0.3, 0.5, 0.2, 0.0, 0.15])
        groups = peak_groups(result, 0.1)
        assert [(g.first_lag, g.last_lag, g.peak_lag) for g in groups] == [(1, 3, 2), (5, 5, 5)]
        assert groups[0].peak_value == 0.5

    def test_no_groups(self):
        result = AcfResult(label="x", step=60, n=100, values=[1.0, 0.01])
        assert peak_groups(result) == []

    def test_summary_json(self):
        result = AcfResult(label="x", step=60, n=100, values=[1.0, 0.3, 0.0])
        summary = summarize(result, 0.1)
        assert summary.max_lag == 2
        assert '"schema_version":"1"' in summary.model_dump_json()


class TestSyntheticStructure:
    def test_two_days_of_minute_lags(self, month_dataset):
        series = open_loop_ace(month_dataset.ace, month_dataset.afrr)
        result = acf(series, 2880, method="fft")
        assert len(result.values) == 2881
        assert min(result.values[1:61]) > 0.3
        assert result.values[1440] >= 0.2
