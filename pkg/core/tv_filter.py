"""
时变载荷得分驱动模型：
    l_{t+1} = c_l + A_l s^(l)_t + B_l l_t,  s^(l)_t = ∇^(l)_t（alpha = 0，单位阵缩放）
    g_{t+1} = c_g + A_g s^(g)_t + B_g g_t,  s^(g)_t = (I^(g)_t)^{-beta} ∇^(g)_t
l_t = vec(Lambda_t) 按列优先堆叠。I^(g)_t 随 Lambda_t 每期重算。
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .context import PanelData
from .density import information_kernel, log_normalizer
from .errors import ConstraintViolation, DimensionMismatch, EigenvalueBelowFloor, NonFiniteState
from .filter import panel_values, unconditional_mean
from .restrictions import LoadingMask
from .schemas import TvFilterOutput, TvMode, TvParams, unvec


def _check(y_t, l_t, g_t, params: TvParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y_t = np.asarray(y_t, dtype=float).ravel()
    l_t = np.asarray(l_t, dtype=float).ravel()
    g_t = np.asarray(g_t, dtype=float).ravel()
    n, r = params.n, params.r
    if y_t.size != n or l_t.size != n * r or g_t.size != r:
        raise DimensionMismatch(
            f"got y_t[{y_t.size}], l_t[{l_t.size}], g_t[{g_t.size}]; model expects n={n}, r={r}"
        )
    return y_t, unvec(l_t, n), g_t


def _residual_weight(y_t, lam, g_t, params: TvParams) -> tuple[np.ndarray, float]:
    e = y_t - lam @ g_t
    return e, 1.0 + float(e @ (e / params.Sigma)) / (params.nu - 2.0)


def tv_logdensity(y_t, l_t, g_t, params: TvParams) -> float:
    y_t, lam, g_t = _check(y_t, l_t, g_t, params)
    _, w = _residual_weight(y_t, lam, g_t, params)
    return log_normalizer(params.nu, params.Sigma) - 0.5 * (params.nu + params.n) * np.log(w)


def score_l(y_t, l_t, g_t, params: TvParams) -> np.ndarray:
    """∇^(l) = (ν+n)/(ν−2) · (1/w) · (g ⊗ I_n) Σ⁻¹ (y − Λ_t g)。"""
    y_t, lam, g_t = _check(y_t, l_t, g_t, params)
    e, w = _residual_weight(y_t, lam, g_t, params)
    gain = (params.nu + params.n) / (params.nu - 2.0) / w
    return gain * np.kron(g_t, e / params.Sigma)


def score_g(y_t, l_t, g_t, params: TvParams) -> np.ndarray:
    y_t, lam, g_t = _check(y_t, l_t, g_t, params)
    e, w = _residual_weight(y_t, lam, g_t, params)
    gain = (params.nu + params.n) / (params.nu - 2.0) / w
    return gain * (lam.T @ (e / params.Sigma))


def tv_information(l_t, params: TvParams) -> np.ndarray:
    """I^(g)_t = ν/(ν+n+2) · Λ_t'Σ⁻¹Λ_t。"""
    lam = unvec(np.asarray(l_t, dtype=float).ravel(), params.n)
    nu, n = params.nu, params.n
    return nu / (nu + n + 2.0) * information_kernel(lam, params.Sigma)


def default_tv_init(params: TvParams, fallback_l: np.ndarray | None = None) -> np.ndarray:
    """
    ScalarTargeted：l_init = target_l；DiagonalSharedC：(I − B_l)^{-1} c_l。

    共享 c_l 时后者每个元素相同，r >= 2 时对应的载荷矩阵秩为 1，I^(g) 奇异；
    这种情况下改用 fallback_l（静态估计或模拟抽取的载荷）。
    """
    if params.mode is TvMode.SCALAR_TARGETED:
        return params.target_l.copy()
    stable = np.abs(params.B_l) < 1.0
    candidate = np.where(stable, params.c_l / np.where(stable, 1.0 - params.B_l, 1.0), params.c_l)
    if np.linalg.matrix_rank(unvec(candidate, params.n)) == params.r:
        return candidate
    if fallback_l is None:
        raise ConstraintViolation(
            "unconditional loading mean is rank deficient as a loading matrix; supply l_init"
        )
    return np.asarray(fallback_l, dtype=float).ravel().copy()


def default_g_init(params: TvParams) -> np.ndarray:
    return unconditional_mean(params.c_g, params.B_g)


def _ties(mask: LoadingMask | None, nr: int) -> tuple[np.ndarray, int]:
    if mask is None:
        return np.arange(nr, dtype=np.int64), nr
    if mask.codes.size != nr:
        raise DimensionMismatch(f"loading mask covers {mask.codes.size} entries, expected {nr}")
    return mask.tie_vec(), mask.n_free


def tv_recursion_call(
    y: np.ndarray,
    eps: np.ndarray,
    simulate: bool,
    params: TvParams,
    l0: np.ndarray,
    g0: np.ndarray,
    mask: LoadingMask | None,
) -> TvFilterOutput:
    """共用于滤波和模拟；把内核状态码转换成异常。"""
    T = y.shape[0]
    n, r = params.n, params.r
    nr = n * r
    tie, n_ties = _ties(mask, nr)
    factors = np.empty((T, r))
    scaled = np.empty((T, r))
    contribs = np.empty(T)
    loadings = np.empty((T, nr))
    infos = np.empty((T, r, r))
    next_l = np.empty(nr)
    next_g = np.empty(r)
    status, t, idx, value, total = _kernels.tv_recursion(
        y, eps, simulate,
        np.ascontiguousarray(l0, dtype=float), np.ascontiguousarray(g0, dtype=float),
        1.0 / params.Sigma,
        params.c_l, params.A_l, params.B_l,
        params.c_g, np.ascontiguousarray(params.A_g), np.ascontiguousarray(params.B_g),
        tie, n_ties, params.beta, params.nu,
        log_normalizer(params.nu, params.Sigma), params.nu / (params.nu + n + 2.0),
        factors, scaled, contribs, loadings, infos, next_l, next_g,
    )
    if status == _kernels.EIGEN_FLOOR:
        raise EigenvalueBelowFloor(int(idx), float(value), t=int(t) + 1)
    if status == _kernels.NON_FINITE:
        raise NonFiniteState(int(t) + 1)
    return TvFilterOutput(
        factors=factors,
        scaled_scores=scaled,
        loglik_contribs=contribs,
        total_loglik=float(total),
        next_factor=next_g,
        loadings=loadings,
        next_loading=next_l,
        information=infos,
    )


def run_tv_filter(
    data: PanelData | np.ndarray,
    params: TvParams,
    l_init: np.ndarray | None = None,
    g_init: np.ndarray | None = None,
    mask: LoadingMask | None = None,
) -> TvFilterOutput:
    """
    mask 给定时载荷得分投影到约束上：固定元素得分为 0，绑定元素共享成员得分之和，
    因此从满足约束的 l_init 出发，路径始终满足约束。
    """
    y = panel_values(data, params.n)
    nr = params.n * params.r
    l0 = default_tv_init(params) if l_init is None else np.asarray(l_init, dtype=float).ravel()
    g0 = default_g_init(params) if g_init is None else np.asarray(g_init, dtype=float).ravel()
    if l0.size != nr or g0.size != params.r:
        raise DimensionMismatch(f"l_init[{l0.size}] / g_init[{g0.size}] do not match n*r={nr}, r={params.r}")
    return tv_recursion_call(y, y, False, params, l0, g0, mask)


def tv_one_step_forecast(output: TvFilterOutput, params: TvParams) -> np.ndarray:
    """ŷ_{T+1|T} = Lambda_{T+1} g_{T+1}。"""
    return unvec(output.next_loading, params.n) @ output.next_factor


def tv_common_component(output: TvFilterOutput, params: TvParams) -> np.ndarray:
    n, r = params.n, params.r
    lam = output.loadings.reshape(-1, r, n)  # [t, k, i] = l[k*n + i]
    return np.einsum("tki,tk->ti", lam, output.factors)
