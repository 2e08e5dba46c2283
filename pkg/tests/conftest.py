from pathlib import Path
from typing import Dict

import numpy as np
import pytest

from imblab.evaluation import FeatureSetSpec, cross_validate
from imblab.hgbr import FeatureMatrix, GbtConfig
from imblab.synthetic import SyntheticConfig, generate
from imblab.timeseries import BalancingDataset, TimeSeries


@pytest.fixture(scope="module")
def make_csv_text() -> Dict[str, str]:
    """
    CSV files in the time series format, some of them malformed.
    """

    return {
        "valid": (
            "timestamp,ace,afrr\n"
            "2022-05-01T00:00:00Z,100.5,-20\n"
            "2022-05-01T00:05:00Z,,-10\n"
            "2022-05-01T00:10:00Z,-40,0.25\n"
            "2022-05-01T00:15:00Z,12,\n"
        ),
        "uneven": (
            "timestamp,ace\n"
            "2022-05-01T00:00:00Z,1\n"
            "2022-05-01T00:05:00Z,2\n"
            "2022-05-01T00:07:00Z,3\n"
        ),
        "duplicate": (
            "timestamp,ace\n"
            "2022-05-01T00:00:00Z,1\n"
            "2022-05-01T00:05:00Z,2\n"
            "2022-05-01T00:05:00Z,3\n"
        ),
        "bad_number": (
            "timestamp,ace,afrr\n"
            "2022-05-01T00:00:00Z,1,2\n"
            "2022-05-01T00:05:00Z,2,abc\n"
        ),
        "literal_nan": (
            "timestamp,ace\n"
            "2022-05-01T00:00:00Z,1\n"
            "2022-05-01T00:05:00Z,nan\n"
        ),
        "one_row": "timestamp,ace\n2022-05-01T00:00:00Z,1\n",
        "bad_timestamp": (
            "timestamp,ace\n"
            "2022-05-01T00:00:00Z,1\n"
            "yesterday,2\n"
        ),
    }


@pytest.fixture
def write_csv_text(tmp_path, make_csv_text):
    """Write one of the sample CSV texts to a file and return its path."""

    def write(name: str) -> Path:
        path = tmp_path / f"{name}.csv"
        path.write_text(make_csv_text[name], encoding="utf-8")
        return path

    return write


@pytest.fixture
def make_series():
    """Make a series starting at midnight on 1 May 2022."""

    def make(values, step: int = 300, label: str = "ace", start: str = "2022-05-01T00:00:00Z"):
        return TimeSeries(start=start, step=step, values=values, label=label)

    return make


@pytest.fixture(scope="session")
def small_dataset() -> BalancingDataset:
    """Ten days of synthetic data."""
    return generate(SyntheticConfig(days=10, seed=3))


@pytest.fixture(scope="session")
def month_dataset() -> BalancingDataset:
    """Thirty days of synthetic data with the default parameters."""
    return generate(SyntheticConfig(days=30))


@pytest.fixture(scope="session")
def quick_gbt_config() -> GbtConfig:
    """Hyperparameters small enough for fast tests."""
    return GbtConfig(learning_rate=0.2, max_iterations=30, max_leaf_nodes=15, min_samples_leaf=20)


@pytest.fixture(scope="session")
def feature_set_report(month_dataset, quick_gbt_config):
    """Cross-validation of the X1+X2+X3, X2 and X3 feature sets."""
    combos = [FeatureSetSpec.from_expression(name) for name in ("X1+X2+X3", "X2", "X3")]
    return cross_validate(month_dataset, "imbalance", combos, quick_gbt_config, k=4)


@pytest.fixture(scope="module")
def heteroscedastic_data():
    """
    Two features: the first moves the mean, the second scales the noise.
    """
    rng = np.random.default_rng(11)
    n = 40000
    x = rng.uniform(0, 1, size=(n, 2))
    y = 10 * x[:, 0] + (0.5 + 2 * x[:, 1]) * rng.standard_normal(n)
    matrix = FeatureMatrix(columns=["level", "spread"], values=x)
    return matrix, y
