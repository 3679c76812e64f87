"""命令行端到端：输出文件、退出码与可复现性。"""
import json

import numpy as np
import pandas as pd
import pytest

from app.cli import main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SDFM_THREADS", "SDFM_OUTPUT_DIR", "SDFM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def _simulate(out_dir, *extra):
    return main(["simulate", "--T", "120", "--seed", "5", "--output-dir", str(out_dir), *extra])


class TestSimulate:
    def test_writes_panel_and_factors(self, tmp_path):
        assert _simulate(tmp_path) == 0
        panel = pd.read_csv(tmp_path / "simulated.csv")
        assert panel.shape == (120, 5)
        factors = pd.read_csv(tmp_path / "simulated_factors.csv")
        assert list(factors.columns) == ["f1", "f2"]
        meta = json.loads((tmp_path / "simulated.meta.json").read_text(encoding="utf-8"))
        assert meta["provenance"]["seed"] == 5
        assert meta["provenance"]["command"] == "simulate"

    def test_rerun_is_byte_identical(self, tmp_path):
        _simulate(tmp_path / "a")
        _simulate(tmp_path / "b", "--threads", "3")
        for name in ("simulated.csv", "simulated.meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_explicit_parameters(self, tmp_path, one_factor_params):
        config = tmp_path / "dgp.json"
        config.write_text(json.dumps({"dgp": {"params": one_factor_params.to_dict()}}), encoding="utf-8")
        assert _simulate(tmp_path, "--config", str(config)) == 0
        assert pd.read_csv(tmp_path / "simulated.csv").shape == (120, 3)


class TestExitCodes:
    def test_unknown_preset_is_a_config_error(self, tmp_path, capsys):
        assert _simulate(tmp_path, "--preset", "static_mid_dim") == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_data_file(self, tmp_path):
        assert main(["estimate", "--data", str(tmp_path / "absent.csv"), "--output-dir", str(tmp_path)]) == 2

    def test_malformed_panel(self, tmp_path, capsys):
        path = tmp_path / "panel.csv"
        path.write_text("a,b\n1,2\n3,\n5,6\n", encoding="utf-8")
        assert main(["estimate", "--data", str(path), "--output-dir", str(tmp_path)]) == 3
        assert "row 2, column 2" in capsys.readouterr().err

    def test_unknown_override(self, tmp_path):
        assert _simulate(tmp_path, "--set", "simulation.length=3") == 2

    def test_compare_needs_fits(self, tmp_path):
        assert main(["compare", "--output-dir", str(tmp_path)]) == 2

    @pytest.mark.parametrize("exc", [np.linalg.LinAlgError("singular matrix"), OSError("disk full")])
    def test_unexpected_exception_is_logged_not_raised(self, tmp_path, monkeypatch, capsys, caplog, exc):
        def boom(config):
            raise exc

        monkeypatch.setattr("app.cli.cmd_simulate", boom)
        assert _simulate(tmp_path) == 1
        err = capsys.readouterr().err
        assert err.startswith(f"error: unexpected {type(exc).__name__}")
        assert any(rec.exc_info is not None and rec.exc_info[1] is exc for rec in caplog.records)


class TestPipeline:
    FAST = ["--set", "estimation.max_iterations=5", "--set", "estimation.restarts=1"]

    def test_estimate_then_compare(self, tmp_path):
        assert _simulate(tmp_path) == 0
        data = str(tmp_path / "simulated.csv")
        common = ["--data", data, "--output-dir", str(tmp_path), *self.FAST]
        assert main(["estimate", "--r", "1", "--label", "1F Full", *common]) == 0
        assert main(["estimate", "--r", "2", "--label", "2F Full", *common]) == 0
        fit = json.loads((tmp_path / "fit_1f_full.json").read_text(encoding="utf-8"))
        assert fit["label"] == "1F Full"
        assert fit["free_params"] == 5 + 0 + 1 + 1 + 5 + 1

        fits = [str(tmp_path / "fit_1f_full.json"), str(tmp_path / "fit_2f_full.json")]
        assert main(["compare", *fits, "--output-dir", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "comparison.csv")
        assert list(table["label"]) == ["1F Full", "2F Full"]
        assert (tmp_path / "lr_tests.meta.json").exists()

    def test_forecast_with_saved_fit(self, tmp_path):
        _simulate(tmp_path)
        data = str(tmp_path / "simulated.csv")
        main(["estimate", "--r", "1", "--data", data, "--output", str(tmp_path / "fit.json"), *self.FAST])
        code = main([
            "forecast", "--data", data, "--window", "100", "--fit", str(tmp_path / "fit.json"),
            "--output-dir", str(tmp_path),
        ])
        assert code == 0
        summary = json.loads((tmp_path / "forecast_summary.json").read_text(encoding="utf-8"))
        assert summary["forecasts"] == 20
        assert summary["standardized"] is True
        assert len(pd.read_csv(tmp_path / "forecasts.csv")) == 20

    def test_diagnose_on_simulated_data(self, tmp_path):
        code = main([
            "diagnose", "--output-dir", str(tmp_path), "--set", "simulation.T=150",
            "--set", "diagnose.n_transforms=2", "--set", "diagnose.n_permutations=3",
        ])
        assert code == 0
        rows = pd.read_csv(tmp_path / "diagnostics.csv")
        assert len(rows) == 2 * 2 + 3 + 3
        summary = json.loads((tmp_path / "diagnose_summary.json").read_text(encoding="utf-8"))
        assert summary["unexpected_failures"] == 0
