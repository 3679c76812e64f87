"""
实验配置：一个 JSON 文档，分节 data / model / restriction / estimation / dgp / simulation /
montecarlo / forecast / diagnose / compare，外加顶层 seed、threads、output_dir。

优先级：命令行 > 配置文件 > 环境变量（SDFM_THREADS、SDFM_OUTPUT_DIR，经 .env 加载）> 内置默认。
"""
from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from core.errors import ConfigError
from core.estimator import EstimationConfig
from core.restrictions import LoadingRestriction, groups_from_labels

from .provenance import config_hash

logger = logging.getLogger(__name__)


def load_env() -> None:
    try:
        from dotenv import load_dotenv
        load_dotenv()
    except ImportError:
        pass


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "output_dir": "outputs",
    "data": {"path": None, "standardize": True},
    "model": {"r": 1, "beta": 0.5, "kind": "static", "tv_mode": "scalar_targeted", "shared_b": True, "label": None},
    "restriction": {"kind": "full", "groups": None, "fixed_c1": None},
    "estimation": {"max_iterations": 500, "gradient_step": 1e-6, "restarts": 3, "perturbation_scale": 0.25},
    "dgp": {"preset": "static_low_dim", "params": None},
    "simulation": {"T": 500, "burn_in": 100},
    "montecarlo": {
        "sample_sizes": [250, 1000, 4000],
        "replications": 250,
        "lambda_law": "uniform",
        "perturbation_scale": 0.5,
        "summaries": ["kde", "frobenius"],
    },
    "forecast": {"window": 312, "refit_every": 1, "cold_start": False, "fit": None},
    "diagnose": {"n_transforms": 10, "n_permutations": 20, "fit": None, "order_shift": None},
    "compare": {"fits": [], "nestings": []},
}

# 值本身是自由结构（dict / list），合并时整体替换、不检查子键
_OPAQUE = {("dgp", "params"), ("restriction", "groups"), ("diagnose", "order_shift")}


def _merge(base: dict[str, Any], update: dict[str, Any], path: tuple[str, ...] = ()) -> dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        where = path + (key,)
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(where)!r}")
        if isinstance(base[key], dict) and where not in _OPAQUE:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {'.'.join(where)!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_override(item: str) -> dict[str, Any]:
    """"section.key=value" -> 嵌套 dict；value 先按 JSON 解析，失败则作字符串。"""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {item!r} has an empty key")
    node: dict[str, Any] = {}
    cursor = node
    for p in parts[:-1]:
        cursor[p] = {}
        cursor = cursor[p]
    cursor[parts[-1]] = _parse_value(raw.strip())
    return node


def _env_layer() -> dict[str, Any]:
    load_env()
    layer: dict[str, Any] = {}
    threads = (os.getenv("SDFM_THREADS") or "").strip()
    if threads:
        try:
            layer["threads"] = int(threads)
        except ValueError:
            raise ConfigError(f"SDFM_THREADS must be an integer, got {threads!r}") from None
    out_dir = (os.getenv("SDFM_OUTPUT_DIR") or "").strip()
    if out_dir:
        layer["output_dir"] = out_dir
    return layer


@dataclass
class ExperimentConfig:
    values: dict[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self) -> None:
        v = self.values
        if not isinstance(v.get("seed"), int) or v["seed"] < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {v.get('seed')!r}")
        if not isinstance(v.get("threads"), int) or v["threads"] < 1:
            raise ConfigError(f"threads must be a positive integer, got {v.get('threads')!r}")

    def __getitem__(self, section: str) -> Any:
        return self.values[section]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def threads(self) -> int:
        return self.values["threads"]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output_dir"])

    @property
    def hash(self) -> str:
        return config_hash(self.values)

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self.values)

    def data_path(self) -> Path:
        path = self.values["data"]["path"]
        if not path:
            raise ConfigError("data.path is required for this command")
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"data file not found: {path}")
        return path

    def restriction(self) -> LoadingRestriction:
        """groups 可给整数列表，或给出每个序列的组名（字符串按出现顺序编号）。"""
        section = self.values["restriction"]
        groups = section.get("groups")
        if groups is not None and any(not isinstance(g, int) for g in groups):
            groups = groups_from_labels(groups)
        return LoadingRestriction(kind=section.get("kind", "full"), groups=groups, fixed_c1=section.get("fixed_c1"))

    def estimation_config(self) -> EstimationConfig:
        model = self.values["model"]
        return EstimationConfig(
            restriction=self.restriction(),
            r=int(model["r"]),
            shared_b=bool(model["shared_b"]),
            seed=self.seed,
            beta=float(model["beta"]),
            model=model["kind"],
            tv_mode=model["tv_mode"],
            threads=self.threads,
            **self.values["estimation"],
        )


def load_config(
    path: str | Path | None = None,
    overrides: Iterable[str] = (),
    flags: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """默认 <- 环境 <- 文件 <- --set 覆盖 <- 具名命令行参数。"""
    values = _merge(DEFAULTS, _env_layer())
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = _merge(values, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
    for item in overrides:
        values = _merge(values, parse_override(item))
    for key, value in (flags or {}).items():
        if value is not None:
            values = _merge(values, parse_override(f"{key}={json.dumps(value)}"))
    config = ExperimentConfig(values)
    logger.debug("resolved config %s", config.hash)
    return config
