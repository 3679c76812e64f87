"""蒙特卡洛调度与汇总。"""
import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

import labs.montecarlo as mc
from core.errors import ConfigError, ReplicationFailureRate
from core.estimator import EstimationConfig
from labs.montecarlo import (
    McDesign,
    McResult,
    estimation_config_for,
    kde_grid,
    kde_table,
    run_mc,
    summarize_distances,
    summarize_estimates,
)


def _estimates(rmse_by_T):
    """每个 T 两个重复，估计 = 真值 ± rmse。"""
    rows = []
    for T, rmse in rmse_by_T.items():
        for k, sign in enumerate((-1.0, 1.0)):
            rows.append({"T": T, "replication": k, "parameter": "nu", "true": 5.0, "estimate": 5.0 + sign * rmse})
            rows.append({"T": T, "replication": k, "parameter": "Lambda[1,1]", "true": 0.5, "estimate": 0.5})
    return pd.DataFrame(rows)


class TestDesign:
    def test_defaults(self):
        design = McDesign()
        assert design.sample_sizes == (250, 1000, 4000)
        assert design.replications == 250
        assert design.perturbation_scale == 0.5

    @pytest.mark.parametrize(
        "changes",
        [{"replications": -1}, {"sample_sizes": ()}, {"lambda_law": "normal"},
         {"dgp": "static_mid_dim"}, {"summaries": ("histogram",)}],
    )
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            McDesign(**changes)

    def test_explicit_parameters_need_fixed_law(self, dgp_params):
        with pytest.raises(ConfigError):
            McDesign(dgp=dgp_params)
        assert McDesign(dgp=dgp_params, lambda_law="fixed").truth(3) is dgp_params

    def test_from_dict(self, dgp_params):
        design = McDesign.from_dict(
            {"dgp": dgp_params.to_dict(), "lambda_law": "fixed", "sample_sizes": [100], "replications": 3}, seed=4
        )
        assert design.seed == 4
        np.testing.assert_array_equal(design.truth(0).Lambda, dgp_params.Lambda)
        with pytest.raises(ConfigError):
            McDesign.from_dict({"iterations": 5})

    def test_truth_redrawn_per_replication(self):
        design = McDesign(seed=1)
        assert not np.array_equal(design.truth(0).Lambda, design.truth(1).Lambda)
        np.testing.assert_array_equal(design.truth(0).Lambda, design.truth(0).Lambda)

    def test_estimation_config(self):
        cfg = estimation_config_for(McDesign(dgp="tv_low_dim"), EstimationConfig(r=4, threads=8))
        assert cfg.r == 2 and cfg.threads == 1 and not cfg.shared_b
        assert cfg.model == "tv"
        assert cfg.tv_mode.value == "diagonal_shared_c"


class TestSummaries:
    def test_bias_and_rmse(self):
        summary = summarize_estimates(_estimates({250: 0.4, 1000: 0.2}))
        assert list(summary["parameter"].unique()) == ["nu"]
        row = summary[summary["T"] == 250].iloc[0]
        assert row["bias"] == pytest.approx(0.0)
        assert row["rmse"] == pytest.approx(0.4)
        assert row["count"] == 2

    def test_empty_tables_keep_columns(self):
        empty = pd.DataFrame(columns=["T", "replication", "parameter", "true", "estimate"])
        assert list(summarize_estimates(empty).columns) == ["T", "parameter", "true", "mean", "median", "bias", "rmse", "count"]
        assert kde_table(empty).empty
        assert summarize_distances(pd.DataFrame(columns=["T", "replication", "block", "frobenius"])).empty

    def test_kde_grid_spans_sample(self):
        values = np.random.default_rng(0).normal(size=200)
        x, dens = kde_grid(values)
        assert x.size == 200
        assert x[0] < values.min() and x[-1] > values.max()
        assert trapezoid(dens, x) == pytest.approx(1.0, abs=0.01)

    def test_kde_grid_degenerate(self):
        assert kde_grid(np.ones(5)) is None
        assert kde_grid(np.array([1.0])) is None

    def test_distance_summary(self):
        frame = pd.DataFrame({
            "T": [250, 250, 250], "replication": [0, 1, 2], "block": ["Lambda"] * 3, "frobenius": [1.0, 2.0, 6.0],
        })
        out = summarize_distances(frame).iloc[0]
        assert out["median"] == 2.0 and out["mean"] == 3.0 and out["count"] == 3

    def test_rmse_trend(self):
        good = McResult(McDesign(sample_sizes=(250, 1000, 4000)), _estimates({250: 0.4, 1000: 0.2, 4000: 0.1}), pd.DataFrame())
        check = good.rmse_trend()
        assert check.pairs == 2 and check.inversions == 0 and check.ok
        bad = McResult(McDesign(sample_sizes=(250, 1000)), _estimates({250: 0.1, 1000: 0.2}), pd.DataFrame())
        assert not bad.rmse_trend().ok
        assert bad.rmse_trend().offenders == ["nu"]

    def test_kde_respects_requested_summaries(self):
        result = McResult(McDesign(summaries=("frobenius",)), _estimates({250: 0.4}), pd.DataFrame())
        assert result.kde.empty


class TestRunMc:
    def test_zero_replications(self):
        result = run_mc(McDesign(replications=0, sample_sizes=(100,)))
        assert result.estimates.empty
        assert result.failures == []
        assert result.to_summary_dict()["total"] == 0

    def test_failure_rate_limit(self, monkeypatch):
        def failing(design, config, T, index):
            rep = mc._Replication(T=T, index=index)
            if index % 4 == 0:
                rep.error = {"T": T, "replication": index, "message": "boom"}
            return rep

        monkeypatch.setattr(mc, "run_replication", failing)
        with pytest.raises(ReplicationFailureRate) as err:
            run_mc(McDesign(replications=8, sample_sizes=(100,)))
        assert (err.value.failed, err.value.total) == (2, 8)

    @pytest.mark.slow
    def test_small_static_study(self):
        design = McDesign(sample_sizes=(200, 800), replications=4, seed=3)
        config = EstimationConfig(max_iterations=150, restarts=1)
        result = run_mc(design, config, threads=2)
        assert not result.failures
        assert set(result.estimates["T"]) == {200, 800}
        params = set(result.summary["parameter"])
        assert "nu" in params and "A[1,1]" in params
        assert not any(p.startswith("Lambda[") for p in params)
        again = run_mc(design, config, threads=1)
        pd.testing.assert_frame_equal(result.estimates, again.estimates)
