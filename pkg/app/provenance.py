"""
输出溯源：每个输出文件附带 seed 与配置哈希（规范化 JSON 的 sha256 前 16 位）。
不写时间戳，同一配置重跑得到逐字节相同的文件。
"""
from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np

# 不影响计算结果的配置键，不计入哈希
_NEUTRAL_KEYS = ("threads", "output_dir")


def to_jsonable(obj: Any) -> Any:
    """numpy 标量 / 数组转成内置类型；NaN 与 ±inf 写成 null。"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: dict[str, Any]) -> str:
    payload = {k: v for k, v in config.items() if k not in _NEUTRAL_KEYS}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:16]


def build_provenance(config: dict[str, Any], command: str) -> dict[str, Any]:
    """返回写入输出 JSON 的 "provenance" 块。"""
    return {
        "command": command,
        "seed": config.get("seed"),
        "config_hash": config_hash(config),
    }
