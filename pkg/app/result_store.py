"""
结果存储：原子写入（同目录临时文件 + rename）、拟合记录的保存与读取。
CSV 输出旁边写一个 <name>.meta.json，记录 seed 与配置哈希。
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import pandas as pd

from core.errors import ConfigError
from core.estimator import EstimationResult
from labs.evaluation import information_criteria

from .provenance import to_jsonable

logger = logging.getLogger(__name__)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(to_jsonable(payload), ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    prov = payload.get("provenance", {})
    logger.info("wrote %s (seed=%s, config=%s)", path, prov.get("seed"), prov.get("config_hash"))
    return path


def meta_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_csv(path: Path, frame: pd.DataFrame, provenance: dict[str, Any]) -> Path:
    path = Path(path)
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))
    _atomic_write(
        meta_path(path),
        json.dumps(to_jsonable({"file": path.name, "rows": len(frame), "provenance": provenance}),
                   ensure_ascii=False, indent=2, sort_keys=True) + "\n",
    )
    logger.info("wrote %s (seed=%s, config=%s)", path, provenance.get("seed"), provenance.get("config_hash"))
    return path


def read_json(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


# ── 拟合记录 ──
def fit_record(label: str, fit: EstimationResult, provenance: dict[str, Any]) -> dict[str, Any]:
    aic, bic = information_criteria(fit.total_loglik, fit.free_param_count, fit.n_obs)
    return {"label": label, **fit.to_dict(), "aic": aic, "bic": bic, "provenance": provenance}


def save_fit(path: Path, label: str, fit: EstimationResult, provenance: dict[str, Any]) -> Path:
    return write_json(path, fit_record(label, fit, provenance))


def load_fit(path: Path) -> tuple[str, EstimationResult]:
    """读回 (label, EstimationResult)；缺少 label 时用文件名。"""
    record = read_json(path)
    try:
        fit = EstimationResult.from_dict(record)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path} is not a fit record: {e}") from e
    return record.get("label") or Path(path).stem, fit
