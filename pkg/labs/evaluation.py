"""
模型比较与预测评估。

- 信息准则按每个观测计：aic = (-2 LL + 2k) / T，bic = (-2 LL + k ln T) / T；
- 似然比检验的 p 值取卡方上尾（scipy 的正则化不完全伽马）；
- 滚动预测：每个起点只用窗口内观测重新估计（默认用上一起点的估计热启动），
  滤波到窗口末端，给出一步预测。
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.stats import chi2

from core.context import PanelData
from core.errors import ConfigError, NestingViolation, SdfmError
from core.estimator import EstimationConfig, EstimationResult, maximize, maximize_tv
from core.filter import common_component, one_step_forecast, run_filter
from core.restrictions import build_mask
from core.schemas import StaticParams, TvMode, TvParams
from core.streams import derived_seed
from core.tv_filter import run_tv_filter, tv_common_component, tv_one_step_forecast

logger = logging.getLogger(__name__)

NESTING_TOL = 1e-6


# ---------------------------------------------------------------------------
# 信息准则与似然比
# ---------------------------------------------------------------------------
def information_criteria(loglik: float, free_params: int, T: int) -> tuple[float, float]:
    if T < 1:
        raise ConfigError(f"T must be at least 1, got {T}")
    aic = (-2.0 * loglik + 2.0 * free_params) / T
    bic = (-2.0 * loglik + free_params * math.log(T)) / T
    return aic, bic


def lr_test(loglik_restricted: float, loglik_full: float, df: int) -> tuple[float, float]:
    """统计量 2 (LL_full - LL_restricted)，p 值为自由度 df 的卡方上尾概率。"""
    if df < 1:
        raise NestingViolation(f"likelihood-ratio test needs df >= 1, got {df}")
    if loglik_full < loglik_restricted - NESTING_TOL:
        raise NestingViolation(
            f"full model loglik {loglik_full:.6f} is below the restricted {loglik_restricted:.6f}"
        )
    stat = max(2.0 * (loglik_full - loglik_restricted), 0.0)
    return stat, float(chi2.sf(stat, df))


@dataclass
class ComparisonRow:
    label: str
    loglik: float
    aic: float
    bic: float
    free_params: int
    n_obs: int

    @classmethod
    def from_fit(cls, label: str, fit: EstimationResult) -> "ComparisonRow":
        aic, bic = information_criteria(fit.total_loglik, fit.free_param_count, fit.n_obs)
        return cls(label, fit.total_loglik, aic, bic, fit.free_param_count, fit.n_obs)


@dataclass
class LrRow:
    restricted: str
    full: str
    statistic: float
    df: int
    p_value: float


def compare_fits(
    fits: Mapping[str, EstimationResult],
    nestings: Sequence[tuple[str, str]] = (),
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    返回 (比较表, 似然比表)。nestings 中每对为 (受约束模型, 完整模型) 的标签；
    自由度取两者自由参数个数之差。
    """
    rows = [ComparisonRow.from_fit(label, fit) for label, fit in fits.items()]
    lr_rows = []
    for restricted, full in nestings:
        if restricted not in fits or full not in fits:
            raise ConfigError(f"nesting ({restricted}, {full}) names an unknown fit")
        a, b = fits[restricted], fits[full]
        if a.n_obs != b.n_obs:
            raise NestingViolation(f"{restricted} and {full} were fitted on different samples")
        df = b.free_param_count - a.free_param_count
        stat, p = lr_test(a.total_loglik, b.total_loglik, df)
        lr_rows.append(LrRow(restricted, full, stat, df, p))
    table = pd.DataFrame([vars(r) for r in rows], columns=["label", "loglik", "aic", "bic", "free_params", "n_obs"])
    lr = pd.DataFrame([vars(r) for r in lr_rows], columns=["restricted", "full", "statistic", "df", "p_value"])
    return table, lr


# ---------------------------------------------------------------------------
# 样本内
# ---------------------------------------------------------------------------
def fitted_common_component(
    data: PanelData | np.ndarray,
    params: StaticParams | TvParams,
    l_init: np.ndarray | None = None,
    mask: Any = None,
) -> np.ndarray:
    if isinstance(params, TvParams):
        out = run_tv_filter(data, params, l_init, None, mask)
        return tv_common_component(out, params)
    return common_component(run_filter(data, params), params)


def insample_mse(
    data: PanelData,
    params: StaticParams | TvParams,
    l_init: np.ndarray | None = None,
    mask: Any = None,
) -> float:
    """mean_{t,i} (y_ti - (Lambda f_t)_i)^2，f_t 为一步预测因子。"""
    y = data.y if isinstance(data, PanelData) else np.asarray(data, dtype=float)
    return float(np.mean((y - fitted_common_component(data, params, l_init, mask)) ** 2))


def fit_mask(fit: EstimationResult) -> Any:
    params = fit.params
    if isinstance(params, TvParams) and params.mode is TvMode.SCALAR_TARGETED:
        return build_mask(fit.restriction, params.n, params.r)
    return None


# ---------------------------------------------------------------------------
# 滚动预测
# ---------------------------------------------------------------------------
@dataclass
class ForecastResult:
    origins: np.ndarray
    forecasts: np.ndarray
    actuals: np.ndarray
    labels: list[str]
    window: int
    dates: list[str] | None = None
    skipped: list[dict] = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.origins.size)

    @property
    def mse(self) -> float:
        if self.count == 0:
            return math.nan
        return float(np.mean((self.actuals - self.forecasts) ** 2))

    def to_frame(self) -> pd.DataFrame:
        """每个起点一行：起点 t0（1 起）、目标期 t0+1、各序列预测与实际值。"""
        frame = pd.DataFrame({"origin": self.origins, "target": self.origins + 1})
        if self.dates is not None:
            frame["target_date"] = [self.dates[t] for t in self.origins]
        for j, label in enumerate(self.labels):
            frame[f"{label}_forecast"] = self.forecasts[:, j]
            frame[f"{label}_actual"] = self.actuals[:, j]
        return frame


def _forecast_from(window_data: PanelData, fit: EstimationResult) -> np.ndarray:
    params = fit.params
    if isinstance(params, TvParams):
        out = run_tv_filter(window_data, params, fit.l_init, None, fit_mask(fit))
        return tv_one_step_forecast(out, params)
    return one_step_forecast(run_filter(window_data, params), params)


def _estimate(window_data: PanelData, config: EstimationConfig, warm: EstimationResult | None) -> EstimationResult:
    if warm is None:
        return maximize(window_data, config)
    if isinstance(warm.params, TvParams):
        return maximize_tv(window_data, config, init=warm.params, l_init=warm.l_init)
    return maximize(window_data, config, init=warm.params)


def _refit(
    window_data: PanelData,
    config: EstimationConfig,
    warm: EstimationResult | None,
    origin: int,
) -> tuple[EstimationResult | None, dict | None]:
    """热启动失败时退回冷启动；两者都失败则返回错误记录。"""
    cfg = config.replace(seed=derived_seed(config.seed, "origin", origin))
    try:
        return _estimate(window_data, cfg, warm), None
    except (SdfmError, ArithmeticError, np.linalg.LinAlgError) as e:
        if warm is None:
            return None, {"origin": origin, "type": type(e).__name__, "message": str(e)}
        logger.info("warm start failed at origin %d (%s); retrying from the default start", origin, e)
    try:
        return _estimate(window_data, cfg, None), None
    except (SdfmError, ArithmeticError, np.linalg.LinAlgError) as e:
        return None, {"origin": origin, "type": type(e).__name__, "message": str(e)}


def rolling_forecast(
    data: PanelData,
    config: EstimationConfig,
    window: int,
    refit_every: int = 1,
    cold_start: bool = False,
    threads: int = 1,
    fixed: StaticParams | TvParams | EstimationResult | None = None,
) -> ForecastResult:
    """
    起点 t0 = window..T-1：用观测 t0-window+1..t0 估计并滤波，预测 y_{t0+1}。
    refit_every = k 时每 k 个起点重估一次，其余起点沿用最近一次估计只做滤波；
    给定 fixed（参数或已拟合结果）时不估计，各起点只做滤波。
    cold_start 下各次重估互不依赖，可并发。
    """
    T = data.T
    if not 1 <= window < T:
        raise ConfigError(f"window must satisfy 1 <= window < T={T}, got {window}")
    if refit_every < 1:
        raise ConfigError(f"refit_every must be at least 1, got {refit_every}")
    origins = list(range(window, T))
    refits = [t0 for k, t0 in enumerate(origins) if k % refit_every == 0]

    def window_of(t0: int) -> PanelData:
        return data.window(t0 - window, t0)

    fits: dict[int, EstimationResult | None] = {}
    skipped: list[dict] = []
    if fixed is not None:
        if not isinstance(fixed, EstimationResult):
            fixed = EstimationResult(
                params=fixed, total_loglik=math.nan, free_param_count=0, converged=True, iterations=0,
                objective_trace=[], restriction=config.restriction, n_obs=window,
                model="tv" if isinstance(fixed, TvParams) else "static",
            )
        fits = {t0: fixed for t0 in refits}
    elif cold_start:
        cfg = config.replace(threads=1) if threads > 1 else config
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda t0: _refit(window_of(t0), cfg, None, t0), refits))
        else:
            results = [_refit(window_of(t0), cfg, None, t0) for t0 in refits]
        for t0, (fit, err) in zip(refits, results):
            fits[t0] = fit
            if err:
                skipped.append(err)
    else:
        warm = None
        for t0 in refits:
            fit, err = _refit(window_of(t0), config, warm, t0)
            fits[t0] = fit
            if err:
                skipped.append(err)
            else:
                warm = fit

    done, preds, acts = [], [], []
    current = None
    for t0 in origins:
        if t0 in fits:
            current = fits[t0]
        if current is None:
            logger.warning("origin %d skipped: no estimate available", t0)
            continue
        try:
            pred = _forecast_from(window_of(t0), current)
        except SdfmError as e:
            skipped.append({"origin": t0, "type": type(e).__name__, "message": str(e)})
            logger.warning("origin %d skipped: %s", t0, e)
            continue
        done.append(t0)
        preds.append(pred)
        acts.append(data.y[t0])
    n = data.n
    return ForecastResult(
        origins=np.asarray(done, dtype=int),
        forecasts=np.asarray(preds, dtype=float).reshape(-1, n),
        actuals=np.asarray(acts, dtype=float).reshape(-1, n),
        labels=list(data.labels),
        window=window,
        dates=None if data.dates is None else list(data.dates),
        skipped=skipped,
    )


def white_noise_mse(data: PanelData, window: int) -> float:
    """零预测基准（标准化数据上即样本均值预测），与 rolling_forecast 同一组起点。"""
    if not 1 <= window < data.T:
        raise ConfigError(f"window must satisfy 1 <= window < T={data.T}, got {window}")
    return float(np.mean(data.y[window:] ** 2))
