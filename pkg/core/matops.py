"""
对称正定矩阵的分数幂与置换矩阵工具。
得分缩放 S_t = I^{-beta} 的全部矩阵运算都经由此处。
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EigenvalueBelowFloor, InvalidPermutation, NotSymmetric

# 相对最大特征值的下限；低于此值视为奇异信息矩阵
EIGENVALUE_FLOOR = 1e-10
SYMMETRY_TOL = 1e-10


def check_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > tol:
        raise NotSymmetric(f"matrix asymmetry {asym:.3e} exceeds {tol:.0e}")
    return m


def eigen_floor_violation(d: np.ndarray) -> tuple[int, float] | None:
    """返回第一个低于下限的特征值 (index, value)，否则 None。"""
    top = float(np.max(d)) if d.size else 0.0
    floor = EIGENVALUE_FLOOR * top if top > 0 else EIGENVALUE_FLOOR
    bad = np.flatnonzero(d <= floor)
    if bad.size:
        return int(bad[0]), float(d[bad[0]])
    return None


def sym_power(m: np.ndarray, p: float) -> np.ndarray:
    """
    M^p = V diag(d^p) V'，M 必须对称正定。

    结果与其转置取平均以消除浮点漂移。特征值低于 EIGENVALUE_FLOOR（相对最大特征值）
    时抛出 EigenvalueBelowFloor，不做静默截断。
    """
    m = check_symmetric(m)
    if not np.isfinite(p):
        raise ValueError(f"exponent must be finite, got {p}")
    d, v = np.linalg.eigh(m)
    bad = eigen_floor_violation(d)
    if bad is not None:
        raise EigenvalueBelowFloor(*bad)
    out = (v * d**p) @ v.T
    return 0.5 * (out + out.T)


def permutation_indices(perm: Sequence[int]) -> np.ndarray:
    """把置换规范为 0 基索引；同时接受 1 基 {1..m} 与 0 基 {0..m-1}。"""
    arr = np.asarray(perm)
    if arr.ndim != 1 or arr.size == 0 or not np.issubdtype(arr.dtype, np.integer):
        raise InvalidPermutation(f"permutation must be a non-empty integer sequence, got {perm!r}")
    m = arr.size
    base = 0 if arr.min() == 0 else 1
    idx = arr - base
    if idx.min() < 0 or idx.max() >= m or np.unique(idx).size != m:
        raise InvalidPermutation(f"{list(perm)} is not a bijection on 1..{m}")
    return idx.astype(np.int64)


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """P[i, perm[i]] = 1，因此 (P x)_i = x_{perm[i]}。"""
    idx = permutation_indices(perm)
    m = idx.size
    p = np.zeros((m, m))
    p[np.arange(m), idx] = 1.0
    return p
