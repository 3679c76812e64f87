"""配置分层、覆盖与溯源哈希。"""
import json
from pathlib import Path

import pandas as pd
import pytest

from app.config import DEFAULTS, ExperimentConfig, load_config, parse_override
from app.provenance import build_provenance, config_hash, to_jsonable
from app.result_store import load_fit, meta_path, read_json, save_fit, write_csv
from core.errors import ConfigError
from core.estimator import EstimationResult
from core.restrictions import LoadingRestriction, RestrictionKind

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SDFM_THREADS", "SDFM_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)


def _write_config(tmp_path, payload):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestPrecedence:
    def test_defaults(self):
        config = load_config()
        assert config.seed == 0
        assert config.threads == 1
        assert config["forecast"]["window"] == 312
        assert config["montecarlo"]["sample_sizes"] == [250, 1000, 4000]

    def test_environment_then_file_then_flags(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SDFM_THREADS", "3")
        monkeypatch.setenv("SDFM_OUTPUT_DIR", str(tmp_path / "env-out"))
        assert load_config().threads == 3
        assert load_config().output_dir == tmp_path / "env-out"

        path = _write_config(tmp_path, {"threads": 2, "model": {"r": 3}})
        config = load_config(path)
        assert config.threads == 2
        assert config["model"]["r"] == 3
        assert config["model"]["beta"] == 0.5

        config = load_config(path, ["threads=5", "model.r=4"], {"threads": 6})
        assert config.threads == 6
        assert config["model"]["r"] == 4

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv("SDFM_THREADS", "many")
        with pytest.raises(ConfigError):
            load_config()

    def test_unknown_keys(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(overrides=["estimation.tolerance=1"])
        with pytest.raises(ConfigError):
            load_config(_write_config(tmp_path, {"model": {"factors": 2}}))

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["model=3"])

    def test_missing_or_broken_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(broken)

    def test_opaque_values_replace_whole(self):
        config = load_config(overrides=['restriction.groups=["real","real","fin"]', "restriction.kind=gs"])
        assert config.restriction().groups == (1, 1, 2)
        assert config.restriction().kind is RestrictionKind.GROUP_COMMON

    @pytest.mark.parametrize("values", [{"seed": -1}, {"threads": 0}])
    def test_invalid_top_level(self, values):
        with pytest.raises(ConfigError):
            ExperimentConfig({**DEFAULTS, **values})


class TestOverrides:
    def test_json_values(self):
        assert parse_override("estimation.restarts=5") == {"estimation": {"restarts": 5}}
        assert parse_override("forecast.cold_start=true") == {"forecast": {"cold_start": True}}
        assert parse_override("data.path=panel.csv") == {"data": {"path": "panel.csv"}}

    @pytest.mark.parametrize("item", ["restarts", "=5"])
    def test_malformed(self, item):
        with pytest.raises(ConfigError):
            parse_override(item)

    def test_estimation_config(self):
        config = load_config(overrides=["model.r=2", "restriction.kind=lt", "estimation.restarts=2", "seed=9"])
        est = config.estimation_config()
        assert est.r == 2 and est.restarts == 2 and est.seed == 9
        assert est.restriction == LoadingRestriction(RestrictionKind.LT)

    def test_data_path_required(self):
        with pytest.raises(ConfigError):
            load_config().data_path()


class TestProvenance:
    def test_hash_is_stable(self):
        assert load_config().hash == load_config().hash
        assert len(load_config().hash) == 16

    def test_hash_ignores_threads_and_output_dir(self):
        a = load_config(flags={"threads": 4, "output_dir": "elsewhere"})
        assert a.hash == load_config().hash
        assert load_config(flags={"seed": 1}).hash != load_config().hash

    def test_build_provenance(self):
        prov = build_provenance(DEFAULTS, "simulate")
        assert prov == {"command": "simulate", "seed": 0, "config_hash": config_hash(DEFAULTS)}

    def test_non_finite_values_become_null(self):
        assert to_jsonable({"a": float("nan"), "b": [1.0, float("inf")]}) == {"a": None, "b": [1.0, None]}


class TestResultStore:
    def test_csv_sidecar(self, tmp_path):
        prov = build_provenance(DEFAULTS, "simulate")
        path = write_csv(tmp_path / "out" / "table.csv", pd.DataFrame({"x": [1, 2]}), prov)
        meta = read_json(meta_path(path))
        assert meta_path(path).name == "table.meta.json"
        assert meta["rows"] == 2
        assert meta["provenance"]["config_hash"] == prov["config_hash"]

    def test_fit_round_trip(self, tmp_path, one_factor_params):
        fit = EstimationResult(
            params=one_factor_params, total_loglik=-120.5, free_param_count=9, converged=True, iterations=12,
            objective_trace=[-130.0, -120.5], restriction=LoadingRestriction(), n_obs=100,
            restart_logliks=[-120.5, float("-inf")],
        )
        path = save_fit(tmp_path / "fit.json", "1F Full", fit, build_provenance(DEFAULTS, "estimate"))
        record = read_json(path)
        assert record["restart_logliks"] == [-120.5, None]
        assert "aic" in record and "bic" in record
        label, back = load_fit(path)
        assert label == "1F Full"
        assert back.total_loglik == -120.5
        assert back.restart_logliks[1] == float("-inf")

    def test_not_a_fit_record(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"label": "x"}), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_fit(path)


class TestBundledConfigs:
    @pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.json")), ids=lambda p: p.stem)
    def test_bundled_config_resolves(self, path):
        est = load_config(path).estimation_config()
        assert est.r >= 1
