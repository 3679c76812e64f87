"""
蒙特卡洛实验：对每个样本长度 T 与每次重复，抽真值（Lambda 或 A_l 按重复重抽）、模拟、
扰动真值作为起点、估计、记录。重复之间相互独立，线程池并发；汇总按 (T, 重复编号) 排序后顺序归约。

汇总：
- 跨重复固定的标量参数（c、A、B、Sigma、nu 等）：偏差、RMSE、中位数、高斯核密度（Silverman 带宽）；
- 矩阵块（Lambda、Sigma、A_l 等）：估计与真值之差的 Frobenius 范数。
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde

from core.errors import ConfigError, ReplicationFailureRate, SdfmError
from core.estimator import EstimationConfig, StaticPacker, TvPacker, maximize, maximize_tv
from core.restrictions import LoadingRestriction
from core.schemas import StaticParams, TvMode, TvParams, params_from_dict
from core.streams import derived_seed, named_stream
from core.variants import perturb_values

from .simulator import BURN_IN, DGP_PRESETS, build_dgp, simulate_path

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05
KDE_POINTS = 200

# 按重复重抽、不做核密度汇总的参数前缀
_REDRAWN = ("Lambda[", "A_l[")


@dataclass
class McDesign:
    dgp: str | StaticParams | TvParams = "static_low_dim"
    lambda_law: str = "uniform"
    sample_sizes: tuple[int, ...] = (250, 1000, 4000)
    replications: int = 250
    seed: int = 0
    summaries: tuple[str, ...] = ("kde", "frobenius")
    perturbation_scale: float = 0.5
    burn_in: int = BURN_IN

    def __post_init__(self) -> None:
        self.sample_sizes = tuple(int(t) for t in self.sample_sizes)
        self.summaries = tuple(self.summaries)
        if self.replications < 0:
            raise ConfigError(f"replications must be non-negative, got {self.replications}")
        if not self.sample_sizes or min(self.sample_sizes) < 2:
            raise ConfigError("sample_sizes must be a non-empty list of T >= 2")
        if self.lambda_law not in ("uniform", "fixed"):
            raise ConfigError(f"lambda_law must be 'uniform' or 'fixed', got {self.lambda_law!r}")
        if isinstance(self.dgp, str) and self.dgp not in DGP_PRESETS:
            raise ConfigError(f"unknown DGP preset {self.dgp!r}")
        if self.lambda_law == "uniform" and not isinstance(self.dgp, str):
            raise ConfigError("lambda_law 'uniform' redraws from a named preset; pass lambda_law='fixed' with explicit parameters")
        unknown = set(self.summaries) - {"kde", "frobenius"}
        if unknown:
            raise ConfigError(f"unknown summaries: {sorted(unknown)}")

    @property
    def is_tv(self) -> bool:
        if isinstance(self.dgp, str):
            return self.dgp.startswith("tv")
        return isinstance(self.dgp, TvParams)

    def truth(self, replication: int) -> StaticParams | TvParams:
        if self.lambda_law == "fixed":
            return build_dgp(self.dgp, self.seed) if isinstance(self.dgp, str) else self.dgp
        return build_dgp(self.dgp, self.seed, replication)

    @classmethod
    def from_dict(cls, data: dict[str, Any], seed: int = 0) -> "McDesign":
        data = dict(data)
        dgp = data.pop("dgp", "static_low_dim")
        if isinstance(dgp, dict):
            dgp = params_from_dict(dgp)
        known = {"lambda_law", "sample_sizes", "replications", "summaries", "perturbation_scale", "burn_in"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown montecarlo settings: {sorted(unknown)}")
        return cls(dgp=dgp, seed=seed, **data)


def estimation_config_for(design: McDesign, base: EstimationConfig) -> EstimationConfig:
    """MC 统一用无约束载荷、c_1 = 1、对角 B；时变设计用共享 c_l 的对角载荷动态。"""
    cfg = base.replace(restriction=LoadingRestriction(), r=2, shared_b=False, threads=1)
    if design.is_tv:
        cfg = cfg.replace(model="tv", tv_mode=TvMode.DIAGONAL_SHARED_C)
    return cfg


def _packer(truth: StaticParams | TvParams, cfg: EstimationConfig) -> StaticPacker | TvPacker:
    if isinstance(truth, TvParams):
        return TvPacker(cfg.restriction, truth.n, truth.r, TvMode.DIAGONAL_SHARED_C, cfg.shared_b, truth.beta)
    return StaticPacker(cfg.restriction, truth.n, truth.r, cfg.shared_b, truth.beta)


def matrix_blocks(params: StaticParams | TvParams) -> dict[str, np.ndarray]:
    if isinstance(params, TvParams):
        return {
            "c_g": params.c_g, "A_g": params.A_g, "B_g": params.B_g, "Sigma": params.Sigma,
            "nu": np.array([params.nu]), "c_l": params.c_l, "A_l": params.A_l, "B_l": params.B_l,
        }
    return {
        "c": params.c, "A": params.A, "B": params.B, "Lambda": params.Lambda,
        "Sigma": params.Sigma, "nu": np.array([params.nu]),
    }


@dataclass
class _Replication:
    T: int
    index: int
    rows: list[dict[str, Any]] = field(default_factory=list)
    distances: list[dict[str, Any]] = field(default_factory=list)
    loglik: float = math.nan
    converged: bool = False
    error: dict | None = None


def run_replication(design: McDesign, config: EstimationConfig, T: int, index: int) -> _Replication:
    rep = _Replication(T=T, index=index)
    try:
        truth = design.truth(index)
        path = simulate_path(truth, T, derived_seed(design.seed, "simulate", T, index), design.burn_in)
        packer = _packer(truth, config)
        true_values = packer.free_values(truth)
        start = perturb_values(
            true_values, packer.kinds, design.perturbation_scale,
            named_stream(design.seed, "perturb", T, index),
        )
        init = packer.build(start)
        cfg = config.replace(seed=derived_seed(design.seed, "estimate", T, index))
        if isinstance(truth, TvParams):
            fit = maximize_tv(path.data, cfg, init=init, l_init=path.l_init)
        else:
            fit = maximize(path.data, cfg, init=init)
    except (SdfmError, ArithmeticError, np.linalg.LinAlgError) as e:
        rep.error = {"T": T, "replication": index, "type": type(e).__name__, "message": str(e)}
        logger.warning("replication %d at T=%d failed: %s", index, T, e)
        return rep

    estimates = packer.free_values(packer.conform(fit.params))
    for name, true, est in zip(packer.names, true_values, estimates):
        rep.rows.append({
            "T": T, "replication": index, "parameter": name,
            "true": float(true), "estimate": float(est),
        })
    est_blocks = matrix_blocks(fit.params)
    for block, true in matrix_blocks(truth).items():
        rep.distances.append({
            "T": T, "replication": index, "block": block,
            "frobenius": float(np.linalg.norm(np.asarray(est_blocks[block]) - np.asarray(true))),
        })
    rep.loglik = fit.total_loglik
    rep.converged = fit.converged
    return rep


# ---------------------------------------------------------------------------
# 汇总
# ---------------------------------------------------------------------------
def summarize_estimates(table: pd.DataFrame) -> pd.DataFrame:
    """每个 (T, 参数)：真值、均值、中位数、偏差、RMSE、有效重复数。"""
    cols = ["T", "parameter", "true", "mean", "median", "bias", "rmse", "count"]
    if table.empty:
        return pd.DataFrame(columns=cols)
    tracked = table[~table["parameter"].str.startswith(_REDRAWN)]
    rows = []
    for (T, name), grp in tracked.groupby(["T", "parameter"], sort=True):
        err = grp["estimate"].to_numpy() - grp["true"].to_numpy()
        rows.append({
            "T": T,
            "parameter": name,
            "true": float(grp["true"].iloc[0]),
            "mean": float(grp["estimate"].mean()),
            "median": float(grp["estimate"].median()),
            "bias": float(err.mean()),
            "rmse": float(np.sqrt(np.mean(err ** 2))),
            "count": int(len(grp)),
        })
    return pd.DataFrame(rows, columns=cols)


def kde_grid(values: np.ndarray, points: int = KDE_POINTS) -> tuple[np.ndarray, np.ndarray] | None:
    """高斯核、Silverman 带宽；网格覆盖 [min - 3h, max + 3h]。退化样本返回 None。"""
    values = np.asarray(values, dtype=float)
    if values.size < 2 or np.ptp(values) == 0:
        return None
    try:
        kde = gaussian_kde(values, bw_method="silverman")
    except np.linalg.LinAlgError:
        return None
    h = float(np.sqrt(kde.covariance[0, 0]))
    grid = np.linspace(values.min() - 3 * h, values.max() + 3 * h, points)
    return grid, kde(grid)


def kde_table(table: pd.DataFrame) -> pd.DataFrame:
    cols = ["T", "parameter", "x", "density"]
    if table.empty:
        return pd.DataFrame(columns=cols)
    tracked = table[~table["parameter"].str.startswith(_REDRAWN)]
    frames = []
    for (T, name), grp in tracked.groupby(["T", "parameter"], sort=True):
        out = kde_grid(grp["estimate"].to_numpy())
        if out is None:
            continue
        x, dens = out
        frames.append(pd.DataFrame({"T": T, "parameter": name, "x": x, "density": dens}))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=cols)


def summarize_distances(distances: pd.DataFrame) -> pd.DataFrame:
    cols = ["T", "block", "median", "mean", "count"]
    if distances.empty:
        return pd.DataFrame(columns=cols)
    g = distances.groupby(["T", "block"], sort=True)["frobenius"]
    out = pd.DataFrame({"median": g.median(), "mean": g.mean(), "count": g.size()}).reset_index()
    return out[cols]


@dataclass
class TrendCheck:
    inversions: int
    pairs: int
    offenders: list[str] = field(default_factory=list)

    @property
    def allowed(self) -> int:
        return self.pairs // 20

    @property
    def ok(self) -> bool:
        return self.inversions <= self.allowed


@dataclass
class McResult:
    design: McDesign
    estimates: pd.DataFrame
    distances: pd.DataFrame
    failures: list[dict] = field(default_factory=list)
    logliks: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def summary(self) -> pd.DataFrame:
        return summarize_estimates(self.estimates)

    @property
    def frobenius_summary(self) -> pd.DataFrame:
        return summarize_distances(self.distances)

    @property
    def kde(self) -> pd.DataFrame:
        if "kde" not in self.design.summaries:
            return kde_table(self.estimates.iloc[0:0])
        return kde_table(self.estimates)

    def rmse_trend(self) -> TrendCheck:
        """相邻样本长度之间 RMSE 应严格下降；每 20 个 (参数, 长度对) 容许一次反转。"""
        summary = self.summary
        inversions, pairs, offenders = 0, 0, []
        for name, grp in summary.groupby("parameter", sort=True):
            rmse = grp.sort_values("T")["rmse"].to_numpy()
            for k in range(rmse.size - 1):
                pairs += 1
                if not rmse[k + 1] < rmse[k]:
                    inversions += 1
                    offenders.append(str(name))
        return TrendCheck(inversions=inversions, pairs=pairs, offenders=offenders)

    def to_summary_dict(self) -> dict[str, Any]:
        total = len(self.design.sample_sizes) * self.design.replications
        return {
            "replications": self.design.replications,
            "sample_sizes": list(self.design.sample_sizes),
            "failed": len(self.failures),
            "total": total,
            "failures": self.failures,
            "estimates": self.summary.to_dict(orient="records"),
            "frobenius": self.frobenius_summary.to_dict(orient="records"),
        }


def run_mc(design: McDesign, config: EstimationConfig | None = None, threads: int = 1) -> McResult:
    cfg = estimation_config_for(design, config or EstimationConfig())
    units = [(T, k) for T in design.sample_sizes for k in range(design.replications)]
    logger.info("monte carlo: %d replications x %d sample sizes", design.replications, len(design.sample_sizes))

    def work(unit: tuple[int, int]) -> _Replication:
        return run_replication(design, cfg, *unit)

    if threads > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(work, units))
    else:
        reps = [work(u) for u in units]
    reps.sort(key=lambda rep: (rep.T, rep.index))

    failures = [rep.error for rep in reps if rep.error]
    if units and len(failures) / len(units) > MAX_FAILURE_RATE:
        raise ReplicationFailureRate(len(failures), len(units))

    est_cols = ["T", "replication", "parameter", "true", "estimate"]
    dist_cols = ["T", "replication", "block", "frobenius"]
    estimates = pd.DataFrame([row for rep in reps for row in rep.rows], columns=est_cols)
    distances = pd.DataFrame([row for rep in reps for row in rep.distances], columns=dist_cols)
    logliks = pd.DataFrame(
        [{"T": rep.T, "replication": rep.index, "loglik": rep.loglik, "converged": rep.converged}
         for rep in reps if rep.error is None],
        columns=["T", "replication", "loglik", "converged"],
    )
    return McResult(design=design, estimates=estimates, distances=distances, failures=failures, logliks=logliks)
