"""
多起点变体：restart 0 取初始值本身，其余 restart 对每个自由参数做随机符号、
幅度 U(0, scale) 的相对扰动，并把结果拉回参数定义域。
蒙特卡洛中对真值的扰动也走这里。
"""
from __future__ import annotations

from typing import Any

import numpy as np

from .streams import named_stream

# 自由参数的取值域（与 estimator 中的变换一一对应）
RAW = 0     # 实数
POS = 1     # > 0，exp 变换
UNIT = 2    # (-1, 1)，tanh 变换
NU = 3      # > 2，2 + exp 变换

_UNIT_EDGE = 0.999
_NU_FLOOR = 2.05
_POS_FLOOR = 1e-6


def clamp_to_domain(values: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    unit = kinds == UNIT
    out[unit] = np.clip(out[unit], -_UNIT_EDGE, _UNIT_EDGE)
    nu = kinds == NU
    out[nu] = np.maximum(out[nu], _NU_FLOOR)
    pos = kinds == POS
    out[pos] = np.maximum(out[pos], _POS_FLOOR)
    return out


def perturb_values(
    values: np.ndarray,
    kinds: np.ndarray,
    scale: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """x -> x * (1 + s * u)，s 为随机符号，u ~ U(0, scale)。"""
    values = np.asarray(values, dtype=float)
    sign = rng.choice(np.array([-1.0, 1.0]), size=values.size)
    shift = rng.uniform(0.0, scale, size=values.size)
    return clamp_to_domain(values * (1.0 + sign * shift), kinds)


def restart_starts(
    values: np.ndarray,
    kinds: np.ndarray,
    restarts: int,
    scale: float,
    seed: int,
    label: Any = "restart",
) -> list[np.ndarray]:
    starts = [np.asarray(values, dtype=float).copy()]
    for k in range(1, restarts):
        starts.append(perturb_values(values, kinds, scale, named_stream(seed, label, k)))
    return starts


def pick_best(outcomes: list[Any]) -> Any:
    """按总对数似然取最优；并列时取编号最小者，保证结果与并发顺序无关。"""
    ranked = sorted(outcomes, key=lambda o: (-o.loglik, o.index))
    return ranked[0]
