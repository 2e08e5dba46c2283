import json

import pytest
from click.testing import CliRunner

from imblab.cli import cli

QUICK_MODEL = ["--max-iterations", "3", "--max-leaf-nodes", "4"]


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def manifest(runner, tmp_path_factory):
    """A three-day synthetic dataset written by the synth command."""
    directory = tmp_path_factory.mktemp("data")
    result = runner.invoke(cli, ["synth", "--days", "3", "--seed", "4", "--out", str(directory)])
    assert result.exit_code == 0, result.output
    return directory / "manifest.json"


class TestSynth:
    def test_writes_manifest_and_files(self, manifest):
        assert manifest.exists()
        names = {path.name for path in manifest.parent.iterdir()}
        assert {"ace.csv", "activations.csv", "observations.csv"} <= names

    def test_same_seed_same_bytes(self, runner, manifest, tmp_path):
        result = runner.invoke(cli, ["synth", "--days", "3", "--seed", "4", "--out", str(tmp_path)])
        assert result.exit_code == 0
        for name in ("ace.csv", "forecasts_da.csv", "manifest.json"):
            assert (tmp_path / name).read_bytes() == (manifest.parent / name).read_bytes()

    def test_config_file(self, runner, tmp_path):
        config = tmp_path / "synth.json"
        config.write_text(json.dumps({"days": 2, "alpha": 0.0}))
        result = runner.invoke(
            cli, ["synth", "--config", str(config), "--days", "1", "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 0
        lines = (tmp_path / "out" / "ace.csv").read_text().splitlines()
        assert len(lines) == 1 + 1440

    def test_malformed_config_file(self, runner, tmp_path):
        config = tmp_path / "synth.json"
        config.write_text("{not json")
        result = runner.invoke(cli, ["synth", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert '"error": "ValidationError"' in result.output

    def test_accepts_threads(self, runner, manifest, tmp_path):
        args = ["synth", "--days", "3", "--seed", "4", "--threads", "2", "--out", str(tmp_path)]
        assert runner.invoke(cli, args).exit_code == 0
        assert (tmp_path / "ace.csv").read_bytes() == (manifest.parent / "ace.csv").read_bytes()


class TestTrain:
    def run(self, runner, manifest, out, *extra):
        args = [
            "train", "--manifest", str(manifest), "--features", "X2", *QUICK_MODEL,
            "--out", str(out), *extra,
        ]
        return runner.invoke(cli, args)

    def test_same_bytes_for_any_thread_count(self, runner, manifest, tmp_path):
        one = self.run(runner, manifest, tmp_path / "one", "--threads", "1")
        two = self.run(runner, manifest, tmp_path / "two", "--threads", "2")
        assert one.exit_code == two.exit_code == 0, two.output
        suite = json.loads((tmp_path / "one" / "suite.json").read_text())
        assert [model["config"]["loss"] for model in [suite["mean"], *suite["quantiles"]]] == [
            "squared",
            "pinball",
            "pinball",
            "pinball",
        ]
        assert (tmp_path / "one" / "suite.json").read_bytes() == (
            tmp_path / "two" / "suite.json"
        ).read_bytes()

    def test_malformed_gbt_config(self, runner, manifest, tmp_path):
        config = tmp_path / "gbt.json"
        config.write_text('{"learning_rate": ')
        result = self.run(runner, manifest, tmp_path, "--gbt-config", str(config))
        assert result.exit_code == 1
        assert '"error": "ValidationError"' in result.output

    def test_gbt_config_file_with_override(self, runner, manifest, tmp_path):
        config = tmp_path / "gbt.json"
        config.write_text('{"max_iterations": 50, "learning_rate": 0.2}')
        result = self.run(runner, manifest, tmp_path / "out", "--gbt-config", str(config))
        assert result.exit_code == 0, result.output
        suite = json.loads((tmp_path / "out" / "suite.json").read_text())
        assert suite["mean"]["config"]["learning_rate"] == 0.2
        assert len(suite["mean"]["trees"]) == 3


class TestDerive:
    def test_identity_holds(self, runner, manifest, tmp_path):
        result = runner.invoke(cli, ["derive", "--manifest", str(manifest), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / "derive.json").read_text())
        assert summary["rows"] == 3 * 288
        assert summary["reconstruction_residual"] < 1e-9
        header = (tmp_path / "derived.csv").read_text().splitlines()[0]
        assert header == "timestamp,open_loop_ace,system_imbalance"


class TestAnalyze:
    def test_observation_study(self, runner, manifest, tmp_path):
        result = runner.invoke(cli, ["analyze", "--manifest", str(manifest), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        for name in ("pv_lf", "wind_lf", "load_norm"):
            assert (tmp_path / f"imbalance_by_{name}.csv").exists()
        correlations = json.loads((tmp_path / "imbalance_correlations.json").read_text())
        assert set(correlations["correlations"]) == {"pv_lf", "wind_lf", "load_norm"}

    def test_custom_edges(self, runner, manifest, tmp_path):
        args = [
            "analyze", "--manifest", str(manifest), "--explanatory", "wind_lf",
            "--edges", "0,0.5,1", "--min-count", "5", "--out", str(tmp_path),
        ]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "imbalance_by_wind_lf.json").read_text())
        assert len(report["bins"]) == 2


class TestAcf:
    def test_rows(self, runner, manifest, tmp_path):
        args = ["acf", "--manifest", str(manifest), "--max-lag", "100", "--out", str(tmp_path)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "acf.csv").read_text().splitlines()
        assert len(lines) == 1 + 101
        assert lines[1] == "0,0,1.0"
        assert json.loads((tmp_path / "acf_summary.json").read_text())["max_lag"] == 100

    def test_coarser_step(self, runner, manifest, tmp_path):
        args = [
            "acf", "--manifest", str(manifest), "--series", "imbalance", "--step", "5min",
            "--max-lag", "12", "--out", str(tmp_path),
        ]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        assert (tmp_path / "acf.csv").read_text().splitlines()[2].startswith("1,300,")

    def test_unknown_method_is_usage_error(self, runner, manifest, tmp_path):
        args = ["acf", "--manifest", str(manifest), "--method", "wavelet", "--out", str(tmp_path)]
        assert runner.invoke(cli, args).exit_code == 2

    def test_lag_too_large(self, runner, manifest, tmp_path):
        args = ["acf", "--manifest", str(manifest), "--max-lag", "999999", "--out", str(tmp_path)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 1
        assert '"error": "AcfError"' in result.output


class TestEvaluate:
    def run(self, runner, manifest, out, *extra):
        args = [
            "evaluate", "--manifest", str(manifest), "--combos", "X2,X1+X2", "--k", "2",
            *QUICK_MODEL, "--out", str(out), *extra,
        ]
        return runner.invoke(cli, args)

    def test_table(self, runner, manifest, tmp_path):
        result = self.run(runner, manifest, tmp_path, "--trace-fold", "2")
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "cv_table.csv").read_text().splitlines()
        assert lines[0] == "metric,X2,X1+X2"
        assert len(lines) == 11
        report = json.loads((tmp_path / "cv_report.json").read_text())
        assert report["k"] == 2
        assert (tmp_path / "trace_X1_X2.csv").exists()

    def test_same_bytes_for_any_thread_count(self, runner, manifest, tmp_path):
        self.run(runner, manifest, tmp_path / "one", "--threads", "1")
        self.run(runner, manifest, tmp_path / "four", "--threads", "4")
        for name in ("cv_report.json", "cv_table.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes()

    def test_unknown_feature_group(self, runner, manifest, tmp_path):
        result = runner.invoke(
            cli, ["evaluate", "--manifest", str(manifest), "--combos", "X4", "--out", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert '"error": "EvaluationError"' in result.output

    def test_invalid_hyperparameter(self, runner, manifest, tmp_path):
        result = self.run(runner, manifest, tmp_path, "--learning-rate", "2")
        assert result.exit_code == 1
        assert '"error": "ValidationError"' in result.output


class TestSize:
    def test_convolution(self, runner, manifest, tmp_path):
        args = ["size", "--manifest", str(manifest), "--risk", "0.01", "--out", str(tmp_path)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "sizing.json").read_text())
        assert report["method"] == "convolution"
        assert report["upward_mw"] > 0
        assert len(report["inputs_digest"]) == 64

    def test_predicted_quantiles(self, runner, manifest, tmp_path):
        trained = runner.invoke(
            cli,
            ["train", "--manifest", str(manifest), "--features", "X2", *QUICK_MODEL,
             "--out", str(tmp_path)],
        )
        assert trained.exit_code == 0, trained.output
        args = [
            "size", "--manifest", str(manifest), "--method", "predicted-quantiles",
            "--model", str(tmp_path / "suite.json"), "--features", "X2", "--out", str(tmp_path),
        ]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "sizing.json").read_text())
        assert report["method"] == "predicted_quantiles"
        schedule = (tmp_path / "schedule.csv").read_text().splitlines()
        assert len(schedule) - 1 == report["steps"]

    def test_predicted_quantiles_need_model(self, runner, manifest, tmp_path):
        args = [
            "size", "--manifest", str(manifest), "--method", "predicted-quantiles",
            "--out", str(tmp_path),
        ]
        assert runner.invoke(cli, args).exit_code == 2

    def test_invalid_risk(self, runner, manifest, tmp_path):
        args = ["size", "--manifest", str(manifest), "--risk", "0.7", "--out", str(tmp_path)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 1
        assert '"error": "SizingError"' in result.output


class TestErrors:
    def test_missing_option_is_usage_error(self, runner):
        assert runner.invoke(cli, ["derive", "--out", "x"]).exit_code == 2

    def test_corrupt_manifest(self, runner, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text('{"series": {}, "pv_capacity": 1, "wind_capacity": 1}')
        result = runner.invoke(cli, ["derive", "--manifest", str(manifest), "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert '"error": "ValidationError"' in result.output
