"""
Student-t 观测密度（协方差为 Sigma 的参数化）、对因子的得分和条件 Fisher 信息。
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch
from .schemas import StaticParams


def log_normalizer(nu: float, sigma: np.ndarray) -> float:
    """log Γ((ν+n)/2) − log Γ(ν/2) − (n/2) log((ν−2)π) − ½ Σ log Σ_i。"""
    n = sigma.size
    return float(
        gammaln(0.5 * (nu + n))
        - gammaln(0.5 * nu)
        - 0.5 * n * np.log((nu - 2.0) * np.pi)
        - 0.5 * np.sum(np.log(sigma))
    )


def _check(y_t: np.ndarray, f_t: np.ndarray, params: StaticParams) -> tuple[np.ndarray, np.ndarray]:
    y_t = np.asarray(y_t, dtype=float).ravel()
    f_t = np.asarray(f_t, dtype=float).ravel()
    if y_t.size != params.n or f_t.size != params.r:
        raise DimensionMismatch(
            f"y_t has {y_t.size} entries and f_t {f_t.size}; model expects n={params.n}, r={params.r}"
        )
    return y_t, f_t


def _residual_weight(y_t, lam, f_t, sigma, nu) -> tuple[np.ndarray, float]:
    e = y_t - lam @ f_t
    w = 1.0 + float(e @ (e / sigma)) / (nu - 2.0)
    return e, w


def student_t_logdensity(y_t: np.ndarray, f_t: np.ndarray, params: StaticParams) -> float:
    y_t, f_t = _check(y_t, f_t, params)
    _, w = _residual_weight(y_t, params.Lambda, f_t, params.Sigma, params.nu)
    return log_normalizer(params.nu, params.Sigma) - 0.5 * (params.nu + params.n) * np.log(w)


def score(y_t: np.ndarray, f_t: np.ndarray, params: StaticParams) -> np.ndarray:
    """∇_t = (ν+n)/(ν−2) · (1/w_t) · Λ'Σ⁻¹(y_t − Λf_t)。"""
    y_t, f_t = _check(y_t, f_t, params)
    nu, n = params.nu, params.n
    e, w = _residual_weight(y_t, params.Lambda, f_t, params.Sigma, nu)
    return (nu + n) / (nu - 2.0) / w * (params.Lambda.T @ (e / params.Sigma))


def information_kernel(lam: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    g = lam.T @ (lam / sigma[:, None])
    return 0.5 * (g + g.T)


def fisher_information(params: StaticParams) -> np.ndarray:
    """
    ν/(ν+n+2) · Λ'Σ⁻¹Λ，用于得分缩放。

    与真实的 E[∇∇'] 只差常数 (ν+n)/(ν−2)（见 exact_information）；
    beta ∈ (0,1) 时该常数被 A 吸收，因此缩放沿用这个比例形式。
    """
    nu, n = params.nu, params.n
    return nu / (nu + n + 2.0) * information_kernel(params.Lambda, params.Sigma)


def exact_information(params: StaticParams) -> np.ndarray:
    """在协方差为 Sigma 的 Student-t 下 ∇∇' 的期望。"""
    nu, n = params.nu, params.n
    return (nu + n) / (nu - 2.0) * fisher_information(params)
