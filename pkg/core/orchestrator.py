"""
实验编排器：每个子命令一个入口 run_xxx()，返回带耗时的 Report。
只负责串联 core 与 labs，不做文件读写（由 app 层负责）。
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from .context import PanelData
from .estimator import EstimationConfig, EstimationResult, maximize
from .schemas import StaticParams, TvParams

logger = logging.getLogger(__name__)


@dataclass
class SimulateReport:
    data: PanelData
    factors: np.ndarray
    loadings: np.ndarray | None = None
    elapsed_time: float = 0.0


@dataclass
class EstimateReport:
    fit: EstimationResult
    label: str
    aic: float = 0.0
    bic: float = 0.0
    insample_mse: float = 0.0
    elapsed_time: float = 0.0


@dataclass
class ForecastReport:
    result: Any
    mse: float = float("nan")
    white_noise_mse: float = float("nan")
    elapsed_time: float = 0.0


@dataclass
class MonteCarloReport:
    result: Any
    trend_ok: bool = True
    elapsed_time: float = 0.0


@dataclass
class DiagnoseReport:
    rows: pd.DataFrame
    order_shift: dict[str, Any] | None = None
    elapsed_time: float = 0.0

    @property
    def failed_checks(self) -> pd.DataFrame:
        """beta ∈ {0,1} 规则下本应等价却不等价的行（置换检查同理）。"""
        if self.rows.empty:
            return self.rows
        expect = self.rows["check"].isin(["beta0-rule", "permutation"]) | (
            (self.rows["check"] == "beta1-rule") & self.rows["beta"].isin([0.0, 1.0])
        )
        return self.rows[expect & (self.rows["verdict"] != "Equivalent")]


@dataclass
class CompareReport:
    table: pd.DataFrame
    lr: pd.DataFrame = field(default_factory=pd.DataFrame)
    elapsed_time: float = 0.0


def run_simulate(params: StaticParams | TvParams, T: int, seed: int, burn_in: int = 100) -> SimulateReport:
    from labs.simulator import simulate_path

    start = time.time()
    path = simulate_path(params, T, seed, burn_in)
    return SimulateReport(
        data=path.data, factors=path.factors, loadings=path.loadings,
        elapsed_time=time.time() - start,
    )


def run_estimate(data: PanelData, config: EstimationConfig, label: str | None = None) -> EstimateReport:
    """
    估计一个模型并附上每观测 AIC / BIC 与样本内 MSE。
    label 缺省为 "<r>F <约束>"，例如 "3F full"。
    """
    from labs.evaluation import fit_mask, information_criteria, insample_mse

    start = time.time()
    fit = maximize(data, config)
    aic, bic = information_criteria(fit.total_loglik, fit.free_param_count, fit.n_obs)
    mse = insample_mse(data, fit.params, fit.l_init, fit_mask(fit))
    label = label or f"{config.r}F {config.restriction.kind.value}" + (" tv" if config.model == "tv" else "")
    logger.info("%s: loglik=%.4f, aic=%.4f, bic=%.4f, converged=%s", label, fit.total_loglik, aic, bic, fit.converged)
    return EstimateReport(
        fit=fit, label=label, aic=aic, bic=bic, insample_mse=mse,
        elapsed_time=time.time() - start,
    )


def run_forecast(
    data: PanelData,
    config: EstimationConfig,
    window: int,
    refit_every: int = 1,
    cold_start: bool = False,
    threads: int = 1,
    fixed: EstimationResult | None = None,
) -> ForecastReport:
    from labs.evaluation import rolling_forecast, white_noise_mse

    start = time.time()
    result = rolling_forecast(data, config, window, refit_every, cold_start, threads, fixed)
    if result.skipped:
        logger.warning("%d forecast origins skipped", len(result.skipped))
    return ForecastReport(
        result=result,
        mse=result.mse,
        white_noise_mse=white_noise_mse(data, window),
        elapsed_time=time.time() - start,
    )


def run_montecarlo(design: Any, config: EstimationConfig, threads: int = 1) -> MonteCarloReport:
    from labs.montecarlo import run_mc

    start = time.time()
    result = run_mc(design, config, threads)
    trend = result.rmse_trend()
    if not trend.ok:
        logger.warning("RMSE did not shrink with T for: %s", ", ".join(sorted(set(trend.offenders))))
    return MonteCarloReport(result=result, trend_ok=trend.ok, elapsed_time=time.time() - start)


def run_diagnose(
    data: PanelData,
    params: StaticParams,
    n_transforms: int = 10,
    n_permutations: int = 20,
    seed: int = 0,
    threads: int = 1,
    order_shift: tuple[EstimationConfig, Sequence[int]] | None = None,
) -> DiagnoseReport:
    from labs.identification import order_shift_experiment, run_diagnostics

    start = time.time()
    rows = pd.DataFrame(run_diagnostics(data, params, n_transforms, n_permutations, seed, threads))
    shift = None
    if order_shift is not None:
        shift = order_shift_experiment(data, order_shift[0], order_shift[1]).to_row()
    return DiagnoseReport(rows=rows, order_shift=shift, elapsed_time=time.time() - start)


def run_compare(fits: Mapping[str, EstimationResult], nestings: Sequence[tuple[str, str]] = ()) -> CompareReport:
    from labs.evaluation import compare_fits

    start = time.time()
    table, lr = compare_fits(fits, nestings)
    return CompareReport(table=table, lr=lr, elapsed_time=time.time() - start)
