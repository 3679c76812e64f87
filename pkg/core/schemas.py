"""
模型参数与滤波输出的数据结构（v0.2）。
静态载荷 StaticParams、时变载荷 TvParams，以及 FilterOutput / TvFilterOutput。
所有结构均可 to_dict / from_dict，用于拟合结果 JSON。
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .errors import ConstraintViolation, IncompatibleShape


def _vec(x: Any, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise IncompatibleShape(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def _mat(x: Any, name: str, shape: tuple[int, int]) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim == 1 and shape[0] == shape[1] and arr.size == shape[0]:
        arr = np.diag(arr)
    if arr.shape != shape:
        raise IncompatibleShape(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def _is_diagonal(m: np.ndarray) -> bool:
    return bool(np.all(m == np.diag(np.diag(m))))


# ---------------------------------------------------------------------------
# 1. 静态载荷模型
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class StaticParams:
    """f_{t+1} = c + A s_t + B f_t，y_t | f_t ~ t_nu(Lambda f_t, Sigma)。"""

    c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Lambda: np.ndarray
    Sigma: np.ndarray
    nu: float
    beta: float = 0.5

    def __post_init__(self) -> None:
        lam = np.array(self.Lambda, dtype=float)
        if lam.ndim == 1:
            lam = lam.reshape(-1, 1)
        if lam.ndim != 2:
            raise IncompatibleShape(f"Lambda must be n x r, got shape {lam.shape}")
        n, r = lam.shape
        if not n >= r >= 1:
            raise IncompatibleShape(f"need n >= r >= 1, got n={n}, r={r}")
        c = _vec(self.c, "c")
        if c.size != r:
            raise IncompatibleShape(f"c has {c.size} entries, expected r={r}")
        sigma = _vec(self.Sigma, "Sigma")
        if sigma.size != n:
            raise IncompatibleShape(f"Sigma has {sigma.size} entries, expected n={n}")
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "Sigma", sigma)
        object.__setattr__(self, "A", _mat(self.A, "A", (r, r)))
        object.__setattr__(self, "B", _mat(self.B, "B", (r, r)))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "beta", float(self.beta))

        if not self.nu > 2:
            raise ConstraintViolation(f"nu must exceed 2, got {self.nu}")
        if np.any(sigma <= 0):
            raise ConstraintViolation("all Sigma entries must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ConstraintViolation(f"beta must lie in [0, 1], got {self.beta}")

    @property
    def n(self) -> int:
        return self.Lambda.shape[0]

    @property
    def r(self) -> int:
        return self.Lambda.shape[1]

    def is_identified(self) -> bool:
        """A 对角且对角元非零，并且 c_1 = 1。"""
        return (
            _is_diagonal(self.A)
            and bool(np.all(np.diag(self.A) != 0))
            and self.c[0] == 1.0
        )

    def replace(self, **changes: Any) -> "StaticParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "c": self.c.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Lambda": self.Lambda.tolist(),
            "Sigma": self.Sigma.tolist(),
            "nu": self.nu,
            "beta": self.beta,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StaticParams":
        missing = {"c", "A", "B", "Lambda", "Sigma", "nu"} - set(data)
        if missing:
            raise IncompatibleShape(f"static parameters missing keys: {sorted(missing)}")
        return cls(
            c=data["c"], A=data["A"], B=data["B"], Lambda=data["Lambda"],
            Sigma=data["Sigma"], nu=data["nu"], beta=data.get("beta", 0.5),
        )


# ---------------------------------------------------------------------------
# 2. 时变载荷模型
# ---------------------------------------------------------------------------
class TvMode(str, Enum):
    DIAGONAL_SHARED_C = "diagonal_shared_c"
    SCALAR_TARGETED = "scalar_targeted"


@dataclass(frozen=True)
class TvParams:
    """
    l_{t+1} = c_l + A_l * s^(l)_t + B_l * l_t（逐元素，对角），l_t = vec(Lambda_t) 列优先；
    g_{t+1} = c_g + A_g s^(g)_t + B_g g_t。

    c_l / A_l / B_l 可以传标量（共享），统一存为长度 n*r 的向量。
    alpha 只支持 0（载荷得分用单位阵缩放）。
    """

    c_l: np.ndarray
    A_l: np.ndarray
    B_l: np.ndarray
    c_g: np.ndarray
    A_g: np.ndarray
    B_g: np.ndarray
    Sigma: np.ndarray
    nu: float
    beta: float = 0.5
    alpha: float = 0.0
    mode: TvMode = TvMode.DIAGONAL_SHARED_C
    target_l: np.ndarray | None = None

    def __post_init__(self) -> None:
        c_g = _vec(self.c_g, "c_g")
        sigma = _vec(self.Sigma, "Sigma")
        r, n = c_g.size, sigma.size
        if not n >= r >= 1:
            raise IncompatibleShape(f"need n >= r >= 1, got n={n}, r={r}")
        nr = n * r
        object.__setattr__(self, "c_g", c_g)
        object.__setattr__(self, "Sigma", sigma)
        object.__setattr__(self, "A_g", _mat(self.A_g, "A_g", (r, r)))
        object.__setattr__(self, "B_g", _mat(self.B_g, "B_g", (r, r)))
        for name in ("c_l", "A_l", "B_l"):
            v = _vec(getattr(self, name), name)
            if v.size == 1:
                v = np.full(nr, v[0])
            if v.size != nr:
                raise IncompatibleShape(f"{name} has {v.size} entries, expected n*r={nr}")
            object.__setattr__(self, name, v)
        if self.target_l is not None:
            target = _vec(self.target_l, "target_l")
            if target.size != nr:
                raise IncompatibleShape(f"target_l has {target.size} entries, expected {nr}")
            object.__setattr__(self, "target_l", target)
        object.__setattr__(self, "mode", TvMode(self.mode))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "alpha", float(self.alpha))

        if not self.nu > 2:
            raise ConstraintViolation(f"nu must exceed 2, got {self.nu}")
        if np.any(sigma <= 0):
            raise ConstraintViolation("all Sigma entries must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ConstraintViolation(f"beta must lie in [0, 1], got {self.beta}")
        if self.alpha != 0.0:
            raise ConstraintViolation("only alpha = 0 (identity scaling of the loading score) is supported")
        if self.mode is TvMode.SCALAR_TARGETED:
            if self.target_l is None:
                raise ConstraintViolation("scalar_targeted mode needs target_l")
            implied = (1.0 - self.B_l) * self.target_l
            if not np.allclose(self.c_l, implied, rtol=0.0, atol=1e-12):
                raise ConstraintViolation("scalar_targeted mode requires c_l = (1 - B_l) * target_l")

    @classmethod
    def targeted(
        cls,
        target_l: Any,
        A_l: float,
        B_l: float,
        c_g: Any,
        A_g: Any,
        B_g: Any,
        Sigma: Any,
        nu: float,
        beta: float = 0.5,
    ) -> "TvParams":
        """均值目标化：c_l 由 (1 - B_l) * target_l 推出，只剩两个标量自由参数。"""
        target = _vec(target_l, "target_l")
        return cls(
            c_l=(1.0 - float(B_l)) * target, A_l=A_l, B_l=B_l,
            c_g=c_g, A_g=A_g, B_g=B_g, Sigma=Sigma, nu=nu, beta=beta,
            mode=TvMode.SCALAR_TARGETED, target_l=target,
        )

    @property
    def n(self) -> int:
        return self.Sigma.size

    @property
    def r(self) -> int:
        return self.c_g.size

    def is_identified(self) -> bool:
        a_ok = _is_diagonal(self.A_g) and bool(np.all(np.diag(self.A_g) != 0))
        return a_ok and (self.c_g[0] == 1.0 or self.c_l[0] == 1.0)

    def replace(self, **changes: Any) -> "TvParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_l": self.c_l.tolist(),
            "A_l": self.A_l.tolist(),
            "B_l": self.B_l.tolist(),
            "c_g": self.c_g.tolist(),
            "A_g": self.A_g.tolist(),
            "B_g": self.B_g.tolist(),
            "Sigma": self.Sigma.tolist(),
            "nu": self.nu,
            "beta": self.beta,
            "alpha": self.alpha,
            "mode": self.mode.value,
            "target_l": None if self.target_l is None else self.target_l.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TvParams":
        missing = {"c_l", "A_l", "B_l", "c_g", "A_g", "B_g", "Sigma", "nu"} - set(data)
        if missing:
            raise IncompatibleShape(f"time-varying parameters missing keys: {sorted(missing)}")
        return cls(
            c_l=data["c_l"], A_l=data["A_l"], B_l=data["B_l"],
            c_g=data["c_g"], A_g=data["A_g"], B_g=data["B_g"],
            Sigma=data["Sigma"], nu=data["nu"], beta=data.get("beta", 0.5),
            alpha=data.get("alpha", 0.0),
            mode=data.get("mode", TvMode.DIAGONAL_SHARED_C.value),
            target_l=data.get("target_l"),
        )


def params_from_dict(data: dict[str, Any]) -> StaticParams | TvParams:
    """按键自动识别静态 / 时变参数。"""
    return TvParams.from_dict(data) if "c_g" in data else StaticParams.from_dict(data)


# ---------------------------------------------------------------------------
# 3. 滤波输出
# ---------------------------------------------------------------------------
@dataclass
class FilterOutput:
    """
    factors 第 t 行是仅依赖 y_1..y_{t-1} 的预测因子 f_t；
    next_factor 是 f_{T+1}，供一步预测使用。
    total_loglik 按 t = 1..T 从左到右累加。
    """

    factors: np.ndarray
    scaled_scores: np.ndarray
    loglik_contribs: np.ndarray
    total_loglik: float
    next_factor: np.ndarray

    @property
    def T(self) -> int:
        return self.loglik_contribs.size


@dataclass
class TvFilterOutput(FilterOutput):
    loadings: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    next_loading: np.ndarray = field(default_factory=lambda: np.empty(0))
    # 每期的因子 Fisher 信息 I^(g)_t，形状 T x r x r
    information: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 0)))

    def loading_matrix(self, t: int) -> np.ndarray:
        n = self.loadings.shape[1] // self.factors.shape[1]
        return unvec(self.loadings[t], n)


def vec(lam: np.ndarray) -> np.ndarray:
    """列优先堆叠。"""
    return np.asarray(lam, dtype=float).flatten(order="F")


def unvec(l: np.ndarray, n: int) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    return l.reshape((n, l.size // n), order="F")
