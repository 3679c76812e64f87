"""
静态载荷得分驱动滤波：f_{t+1} = c + A s_t + B f_t，s_t = I^{-beta} ∇_t。
对数似然按预测误差分解，t = 1..T 从左到右累加，第一期计入似然。
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .context import PanelData
from .density import fisher_information, log_normalizer
from .errors import DimensionMismatch, NonFiniteState
from .matops import sym_power
from .schemas import FilterOutput, StaticParams


def panel_values(data: PanelData | np.ndarray, n: int) -> np.ndarray:
    y = data.y if isinstance(data, PanelData) else np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y.reshape(1, -1) if y.size == n else y.reshape(-1, 1)
    if y.shape[1] != n:
        raise DimensionMismatch(f"data has {y.shape[1]} series, parameters expect n={n}")
    return np.ascontiguousarray(y, dtype=float)


def unconditional_mean(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(I - B)^{-1} c；B 谱半径 >= 1 时退回 c。"""
    if np.max(np.abs(np.linalg.eigvals(b))) < 1.0:
        return np.linalg.solve(np.eye(c.size) - b, c)
    return np.array(c, dtype=float)


def default_init(params: StaticParams) -> np.ndarray:
    return unconditional_mean(params.c, params.B)


def scaling_matrix(params: StaticParams) -> np.ndarray:
    """I^{-beta}；beta = 0 时直接返回单位阵，不要求信息矩阵非奇异。"""
    if params.beta == 0.0:
        return np.eye(params.r)
    return sym_power(fisher_information(params), -params.beta)


def run_filter(
    data: PanelData | np.ndarray,
    params: StaticParams,
    f_init: np.ndarray | None = None,
) -> FilterOutput:
    y = panel_values(data, params.n)
    T, r = y.shape[0], params.r
    f0 = default_init(params) if f_init is None else np.asarray(f_init, dtype=float).ravel()
    if f0.size != r:
        raise DimensionMismatch(f"f_init has {f0.size} entries, expected r={r}")

    factors = np.empty((T, r))
    scaled = np.empty((T, r))
    contribs = np.empty(T)
    next_f = np.empty(r)
    failed_at, total = _kernels.static_recursion(
        y, y, False,
        np.ascontiguousarray(params.Lambda), 1.0 / params.Sigma,
        params.c, np.ascontiguousarray(params.A), np.ascontiguousarray(params.B),
        np.ascontiguousarray(scaling_matrix(params)), np.ascontiguousarray(f0),
        params.nu, log_normalizer(params.nu, params.Sigma),
        factors, scaled, contribs, next_f,
    )
    if failed_at >= 0:
        raise NonFiniteState(int(failed_at) + 1)
    return FilterOutput(
        factors=factors,
        scaled_scores=scaled,
        loglik_contribs=contribs,
        total_loglik=float(total),
        next_factor=next_f,
    )


def common_component(output: FilterOutput, params: StaticParams) -> np.ndarray:
    """逐期 Lambda f_t（T x n）。"""
    return output.factors @ params.Lambda.T


def one_step_forecast(output: FilterOutput, params: StaticParams) -> np.ndarray:
    """ŷ_{T+1|T} = Lambda f_{T+1}。"""
    return params.Lambda @ output.next_factor
