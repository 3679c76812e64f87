"""
数据生成：从得分驱动模型抽样。

y_t | f_t 服从多元 Student-t（位置 Lambda f_t，协方差 Sigma，自由度 nu），
用高斯尺度混合构造：e = z * sqrt(Sigma) * sqrt((nu - 2) / chi2_nu)。
创新先整体抽好，再交给与滤波相同的递推内核（simulate=True），因此同一 seed 结果逐位一致。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core import _kernels
from core.context import PanelData
from core.density import log_normalizer
from core.errors import ConfigError, NonFiniteState
from core.filter import default_init, scaling_matrix
from core.schemas import StaticParams, TvMode, TvParams
from core.streams import named_stream
from core.tv_filter import default_g_init, default_tv_init, tv_recursion_call

logger = logging.getLogger(__name__)

BURN_IN = 100


@dataclass
class SimulatedPath:
    data: PanelData
    factors: np.ndarray
    loadings: np.ndarray | None = None
    l_init: np.ndarray | None = None
    g_init: np.ndarray | None = None


def student_t_innovations(sigma: np.ndarray, nu: float, T: int, rng: np.random.Generator) -> np.ndarray:
    """T x n 的 Student-t 创新，协方差为 diag(sigma)。"""
    sigma = np.asarray(sigma, dtype=float)
    z = rng.standard_normal((T, sigma.size))
    mix = np.sqrt((nu - 2.0) / rng.chisquare(nu, size=T))
    return z * np.sqrt(sigma) * mix[:, None]


def simulate_path(
    params: StaticParams | TvParams,
    T: int,
    seed: int,
    burn_in: int = BURN_IN,
    l_init: np.ndarray | None = None,
    g_init: np.ndarray | None = None,
) -> SimulatedPath:
    """
    抽样 burn_in + T 期，丢弃前 burn_in 期。
    时变模型的起始载荷依次取 l_init、无条件均值；均值秩亏时从 U(0,1) 抽一个。
    """
    if T < 1:
        raise ConfigError(f"T must be at least 1, got {T}")
    if burn_in < 0:
        raise ConfigError(f"burn_in must be non-negative, got {burn_in}")
    total = T + burn_in
    eps = student_t_innovations(params.Sigma, params.nu, total, named_stream(seed, "innovations"))
    y = np.empty_like(eps)

    if isinstance(params, TvParams):
        return _simulate_tv(params, y, eps, seed, burn_in, l_init, g_init)

    r = params.r
    f0 = default_init(params) if g_init is None else np.asarray(g_init, dtype=float)
    factors = np.empty((total, r))
    failed_at, _ = _kernels.static_recursion(
        y, eps, True,
        np.ascontiguousarray(params.Lambda), 1.0 / params.Sigma,
        params.c, np.ascontiguousarray(params.A), np.ascontiguousarray(params.B),
        np.ascontiguousarray(scaling_matrix(params)), np.ascontiguousarray(f0, dtype=float),
        params.nu, log_normalizer(params.nu, params.Sigma),
        factors, np.empty((total, r)), np.empty(total), np.empty(r),
    )
    if failed_at >= 0:
        raise NonFiniteState(int(failed_at) + 1)
    return SimulatedPath(
        data=PanelData(y[burn_in:].copy()),
        factors=factors[burn_in:].copy(),
        g_init=f0,
    )


def _simulate_tv(
    params: TvParams,
    y: np.ndarray,
    eps: np.ndarray,
    seed: int,
    burn_in: int,
    l_init: np.ndarray | None,
    g_init: np.ndarray | None,
) -> SimulatedPath:
    nr = params.n * params.r
    if l_init is None:
        fallback = named_stream(seed, "start-loading").uniform(0.0, 1.0, size=nr)
        l0 = default_tv_init(params, fallback_l=fallback)
    else:
        l0 = np.asarray(l_init, dtype=float).ravel()
    g0 = default_g_init(params) if g_init is None else np.asarray(g_init, dtype=float)
    out = tv_recursion_call(y, eps, True, params, l0, g0, None)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(int(np.argmax(~np.isfinite(y).all(axis=1))) + 1)
    return SimulatedPath(
        data=PanelData(y[burn_in:].copy()),
        factors=out.factors[burn_in:].copy(),
        loadings=out.loadings[burn_in:].copy(),
        l_init=l0,
        g_init=g0,
    )


def sample_path(params: StaticParams | TvParams, T: int, seed: int, burn_in: int = BURN_IN) -> PanelData:
    return simulate_path(params, T, seed, burn_in).data


# ---------------------------------------------------------------------------
# DGP 预设
# ---------------------------------------------------------------------------
FACTOR_C = (1.0, 0.1)
FACTOR_A = (0.1, 0.3)
FACTOR_B = (0.9, 0.7)
DGP_NU = 5.0


def draw_loadings(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """Lambda_ij ~ U(0, 1)。"""
    return rng.uniform(0.0, 1.0, size=(n, r))


def static_dgp(
    n: int = 5,
    sigma: float = 0.5,
    Lambda: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    beta: float = 0.5,
) -> StaticParams:
    r = len(FACTOR_C)
    if Lambda is None:
        Lambda = draw_loadings(n, r, rng if rng is not None else named_stream(0, "dgp-loadings"))
    return StaticParams(
        c=np.array(FACTOR_C),
        A=np.diag(FACTOR_A),
        B=np.diag(FACTOR_B),
        Lambda=np.asarray(Lambda, dtype=float),
        Sigma=np.full(n, sigma),
        nu=DGP_NU,
        beta=beta,
    )


def static_low_dim(rng: np.random.Generator | None = None, Lambda: np.ndarray | None = None) -> StaticParams:
    return static_dgp(n=5, sigma=0.5, Lambda=Lambda, rng=rng)


def static_high_dim(rng: np.random.Generator | None = None, Lambda: np.ndarray | None = None) -> StaticParams:
    # 噪声方差放大到 2，使信噪比与低维设计相当
    return static_dgp(n=100, sigma=2.0, Lambda=Lambda, rng=rng)


def tv_low_dim(rng: np.random.Generator | None = None, A_l: np.ndarray | None = None) -> TvParams:
    """共享 c_l = 0.1，A_l 对角 U(0, 0.5)，B_l = 0.9；因子块同静态低维设计。"""
    n, r = 5, len(FACTOR_C)
    if A_l is None:
        rng = rng if rng is not None else named_stream(0, "dgp-loading-dynamics")
        A_l = rng.uniform(0.0, 0.5, size=n * r)
    return TvParams(
        c_l=0.1,
        A_l=np.asarray(A_l, dtype=float),
        B_l=0.9,
        c_g=np.array(FACTOR_C),
        A_g=np.diag(FACTOR_A),
        B_g=np.diag(FACTOR_B),
        Sigma=np.full(n, 0.5),
        nu=DGP_NU,
        mode=TvMode.DIAGONAL_SHARED_C,
    )


DGP_PRESETS = {
    "static_low_dim": static_low_dim,
    "static_high_dim": static_high_dim,
    "tv_low_dim": tv_low_dim,
}


def build_dgp(name: str, seed: int, replication: int | None = None) -> StaticParams | TvParams:
    """按预设名构造 DGP；随机部分（Lambda 或 A_l）取自 (seed, 'dgp', replication) 流。"""
    try:
        builder = DGP_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown DGP preset {name!r}; choose from {sorted(DGP_PRESETS)}") from None
    return builder(rng=named_stream(seed, "dgp", name, -1 if replication is None else replication))
