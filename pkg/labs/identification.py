"""
识别性实验台：把重参数化等价、标量识别、序列次序不变性变成可执行的数值检查。

- reparameterize：beta ∈ {0, 1} 时线性变换 T 可被吸收，似然与 Lambda f 路径不变；
- commutation_residual：对角 T 下吸收矩阵 M 的最大非对角元，为 0 当且仅当变换后
  仍是对角 A 的得分驱动形式（beta ∈ (0,1) 时只有标量 T 满足）；
- order_invariance_check：无约束载荷下置换序列不改变似然和因子路径。
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from core.context import PanelData
from core.density import fisher_information
from core.errors import AssumptionViolated, ConstraintViolation, SingularTransform
from core.estimator import EstimationConfig, maximize
from core.filter import common_component, default_init, run_filter
from core.matops import permutation_indices, permutation_matrix, sym_power
from core.restrictions import LoadingRestriction, RestrictionKind
from core.schemas import StaticParams, TvFilterOutput, TvParams
from core.streams import named_stream
from core.tv_filter import default_g_init, run_tv_filter, tv_common_component

logger = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-8
BLOCK_TOL = 1e-8
MAX_CONDITION = 1e8
SAMPLE_CONDITION = 100.0


class Verdict(str, Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"


@dataclass
class TransformReport:
    beta: float
    T_matrix: np.ndarray
    loglik_original: float
    loglik_transformed: float
    max_path_divergence: float
    commutation_residual: float = math.nan
    verdict: Verdict = Verdict.NOT_EQUIVALENT
    check: str = "reparameterization"

    def __post_init__(self) -> None:
        ok = (
            abs(self.loglik_original - self.loglik_transformed) < EQUIVALENCE_TOL
            and self.max_path_divergence < EQUIVALENCE_TOL
        )
        self.verdict = Verdict.EQUIVALENT if ok else Verdict.NOT_EQUIVALENT

    @property
    def loglik_change(self) -> float:
        return abs(self.loglik_original - self.loglik_transformed)

    def to_row(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "beta": self.beta,
            "T_matrix": json_matrix(self.T_matrix),
            "loglik_original": self.loglik_original,
            "loglik_transformed": self.loglik_transformed,
            "loglik_change": self.loglik_change,
            "max_path_divergence": self.max_path_divergence,
            "commutation_residual": self.commutation_residual,
            "verdict": self.verdict.value,
        }


def json_matrix(m: np.ndarray) -> str:
    return ";".join(",".join(f"{x:.12g}" for x in row) for row in np.atleast_2d(m))


# ---------------------------------------------------------------------------
# 变换工具
# ---------------------------------------------------------------------------
def _check_transform(t: np.ndarray, r: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (r, r):
        raise ConstraintViolation(f"transform must be {r} x {r}, got {t.shape}")
    if not np.all(np.isfinite(t)) or np.linalg.cond(t) >= MAX_CONDITION:
        raise SingularTransform(f"transform is singular or ill-conditioned (cond >= {MAX_CONDITION:.0e})")
    return t


def _diag_power(t: np.ndarray, p: float) -> np.ndarray:
    d = np.diag(t)
    if float(p).is_integer():
        return np.diag(d ** p)
    if np.any(d <= 0):
        raise ConstraintViolation("fractional powers of T need a positive diagonal")
    return np.diag(d ** p)


def _absorption_rule(beta: float) -> int:
    if beta not in (0, 1):
        raise ConstraintViolation(f"linear transforms are absorbed only for beta in {{0, 1}}, got {beta}")
    return int(beta)


def reparameterize(params: StaticParams, T: np.ndarray, beta: float) -> StaticParams:
    """
    Lambda -> Lambda T，c -> T⁻¹c，B -> T⁻¹BT；
    A -> T⁻¹ A (T⁻¹)'（beta = 0）或 T⁻¹ A T（beta = 1）。
    变换后的模型仍用 params.beta 滤波，初值取 T⁻¹ f_init 时与原模型等价。
    """
    t = _check_transform(T, params.r)
    rule = _absorption_rule(beta)
    t_inv = np.linalg.inv(t)
    a_bar = t_inv @ params.A @ (t if rule == 1 else t_inv.T)
    return params.replace(
        Lambda=params.Lambda @ t,
        c=t_inv @ params.c,
        A=a_bar,
        B=t_inv @ params.B @ t,
    )


def reparameterization_check(
    data: PanelData,
    params: StaticParams,
    T: np.ndarray,
    beta: float,
    f_init: np.ndarray | None = None,
) -> TransformReport:
    """分别滤波原模型与按 beta 规则变换后的模型，比较似然和 Lambda f 路径。"""
    t = _check_transform(T, params.r)
    f0 = default_init(params) if f_init is None else np.asarray(f_init, dtype=float)
    transformed = reparameterize(params, t, beta)
    out = run_filter(data, params, f0)
    out_bar = run_filter(data, transformed, np.linalg.solve(t, f0))
    divergence = float(np.max(np.abs(common_component(out, params) - common_component(out_bar, transformed))))
    residual = math.nan
    if _is_diagonal(t):
        try:
            residual = commutation_residual(params, t)
        except (AssumptionViolated, ConstraintViolation):
            pass
    return TransformReport(
        beta=params.beta,
        T_matrix=t,
        loglik_original=out.total_loglik,
        loglik_transformed=out_bar.total_loglik,
        max_path_divergence=divergence,
        commutation_residual=residual,
        check=f"beta{int(beta)}-rule",
    )


def noninvariance_witness(
    data: PanelData,
    params: StaticParams,
    T: np.ndarray,
    f_init: np.ndarray | None = None,
) -> float:
    """对 beta ∈ (0,1) 的模型套用 beta = 1 吸收规则，返回对数似然的绝对变化。"""
    return reparameterization_check(data, params, T, 1, f_init).loglik_change


def scalar_normalization(params: StaticParams, q: float) -> bool:
    """T = qI 之后 c̄_1 = c_1 / q 是否仍等于 1。"""
    return params.c[0] / q == 1.0


# ---------------------------------------------------------------------------
# 交换性（吸收）残差
# ---------------------------------------------------------------------------
def _is_diagonal(m: np.ndarray) -> bool:
    return bool(np.all(m == np.diag(np.diag(m))))


def is_block_diagonal(info: np.ndarray, tol: float = BLOCK_TOL) -> bool:
    """
    存在把 {1..r} 分成两块、块间元素全部 <= tol 的划分时为真。
    等价于：以 |I_ij| > tol 为边的图不连通。
    """
    info = np.asarray(info, dtype=float)
    r = info.shape[0]
    linked = np.abs(info) > tol
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(linked[i]):
            if int(j) not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    return len(seen) < r


def _check_score_loading(a: np.ndarray) -> None:
    if not _is_diagonal(a) or np.any(np.diag(a) == 0):
        raise AssumptionViolated("A must be diagonal with non-zero diagonal entries")


def _absorbed_residual(a: np.ndarray, info: np.ndarray, t: np.ndarray, beta: float) -> float:
    """M = Ā · Ī^{-beta} · (T^{-1+beta})' · Ī^{beta}，返回最大非对角绝对值。"""
    t_inv = np.linalg.inv(t)
    a_bar = t_inv @ a @ _diag_power(t, beta)
    info_bar = t.T @ info @ t
    if beta == 0.0:
        m = a_bar @ _diag_power(t, -1.0).T
    else:
        m = a_bar @ sym_power(info_bar, -beta) @ _diag_power(t, beta - 1.0).T @ sym_power(info_bar, beta)
    off = m - np.diag(np.diag(m))
    return float(np.max(np.abs(off))) if off.size else 0.0


def _check_diagonal_transform(T: np.ndarray, r: int) -> np.ndarray:
    t = np.asarray(T, dtype=float)
    if t.shape != (r, r) or not _is_diagonal(t):
        raise ConstraintViolation("commutation checks take a diagonal transform")
    if np.any(np.diag(t) == 0):
        raise SingularTransform("diagonal transform has a zero entry")
    return t


def commutation_residual(params: StaticParams, T: np.ndarray) -> float:
    t = _check_diagonal_transform(T, params.r)
    _check_score_loading(params.A)
    info = fisher_information(params)
    if is_block_diagonal(info):
        raise AssumptionViolated("Fisher information is block diagonal")
    return _absorbed_residual(params.A, info, t, params.beta)


@dataclass
class TvCommutationResult:
    """逐期残差；违反非块对角假设的时期残差记为 NaN 并标记。"""

    residuals: np.ndarray
    violated: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))

    @property
    def max_residual(self) -> float:
        live = self.residuals[~self.violated]
        return float(np.max(live)) if live.size else math.nan


def tv_commutation_residual(output: TvFilterOutput, params: TvParams, T: np.ndarray) -> TvCommutationResult:
    t = _check_diagonal_transform(T, params.r)
    _check_score_loading(params.A_g)
    n_t = output.information.shape[0]
    residuals = np.full(n_t, math.nan)
    violated = np.zeros(n_t, dtype=bool)
    for k in range(n_t):
        info = output.information[k]
        if is_block_diagonal(info):
            violated[k] = True
            continue
        residuals[k] = _absorbed_residual(params.A_g, info, t, params.beta)
    if violated.any():
        logger.warning("block-diagonal factor information at %d of %d periods", int(violated.sum()), n_t)
    return TvCommutationResult(residuals=residuals, violated=violated)


# ---------------------------------------------------------------------------
# 时变载荷的重参数化（对角 T，alpha = 0）
# ---------------------------------------------------------------------------
def reparameterize_tv(params: TvParams, T: np.ndarray, beta: float) -> TvParams:
    """
    D = T' ⊗ I_n（对角）：l -> D l，c_l -> D c_l，A_l -> D A_l D，B_l 不变；
    因子块按静态规则变换。
    """
    t = _check_diagonal_transform(T, params.r)
    _check_transform(t, params.r)
    rule = _absorption_rule(beta)
    d = np.repeat(np.diag(t), params.n)
    t_inv = np.linalg.inv(t)
    return params.replace(
        c_l=d * params.c_l,
        A_l=d * d * params.A_l,
        target_l=None if params.target_l is None else d * params.target_l,
        c_g=t_inv @ params.c_g,
        A_g=t_inv @ params.A_g @ (t if rule == 1 else t_inv.T),
        B_g=t_inv @ params.B_g @ t,
    )


def tv_reparameterization_check(
    data: PanelData,
    params: TvParams,
    T: np.ndarray,
    beta: float,
    l_init: np.ndarray,
    g_init: np.ndarray | None = None,
) -> TransformReport:
    t = _check_diagonal_transform(T, params.r)
    g0 = default_g_init(params) if g_init is None else np.asarray(g_init, dtype=float)
    l0 = np.asarray(l_init, dtype=float)
    transformed = reparameterize_tv(params, t, beta)
    d = np.repeat(np.diag(t), params.n)
    out = run_tv_filter(data, params, l0, g0)
    out_bar = run_tv_filter(data, transformed, d * l0, np.linalg.solve(t, g0))
    divergence = float(np.max(np.abs(
        tv_common_component(out, params) - tv_common_component(out_bar, transformed)
    )))
    return TransformReport(
        beta=params.beta,
        T_matrix=t,
        loglik_original=out.total_loglik,
        loglik_transformed=out_bar.total_loglik,
        max_path_divergence=divergence,
        check=f"tv-beta{int(beta)}-rule",
    )


# ---------------------------------------------------------------------------
# 序列次序
# ---------------------------------------------------------------------------
def permute_params(params: StaticParams, perm: Sequence[int]) -> StaticParams:
    p = permutation_matrix(perm)
    return params.replace(Lambda=p @ params.Lambda, Sigma=params.Sigma[permutation_indices(perm)])


def order_invariance_check(
    data: PanelData,
    params: StaticParams,
    perm: Sequence[int],
    restriction: LoadingRestriction | None = None,
) -> TransformReport:
    """同一 f_init 下滤波 (y, Lambda, Sigma) 与 (Py, PLambda, PSigma)，比较似然、因子和共同成分。"""
    if restriction is not None and restriction.kind is not RestrictionKind.FULL:
        raise AssumptionViolated("order invariance needs unconstrained loadings")
    idx = permutation_indices(perm)
    f0 = default_init(params)
    permuted = permute_params(params, perm)
    out = run_filter(data, params, f0)
    out_p = run_filter(data.permuted(perm), permuted, f0)
    factor_gap = float(np.max(np.abs(out.factors - out_p.factors)))
    common_gap = float(np.max(np.abs(
        common_component(out, params)[:, idx] - common_component(out_p, permuted)
    )))
    return TransformReport(
        beta=params.beta,
        T_matrix=permutation_matrix(perm),
        loglik_original=out.total_loglik,
        loglik_transformed=out_p.total_loglik,
        max_path_divergence=max(factor_gap, common_gap),
        check="permutation",
    )


@dataclass
class OrderShiftReport:
    restriction: str
    perm: list[int]
    loglik_original: float
    loglik_permuted: float
    max_common_divergence: float

    def to_row(self) -> dict[str, Any]:
        return {
            "check": "order-shift",
            "restriction": self.restriction,
            "perm": ",".join(str(i + 1) for i in self.perm),
            "loglik_original": self.loglik_original,
            "loglik_permuted": self.loglik_permuted,
            "max_common_divergence": self.max_common_divergence,
        }


def order_shift_experiment(data: PanelData, config: EstimationConfig, perm: Sequence[int]) -> OrderShiftReport:
    """
    原次序与置换次序各自重新估计（同一约束），比较拟合的共同成分。
    LT 约束下结果依赖次序；只报告差异，不设阈值。
    """
    idx = permutation_indices(perm)
    restr = config.restriction
    fit = maximize(data, config)
    permuted_restr = restr
    if restr.groups is not None:
        permuted_restr = LoadingRestriction(restr.kind, tuple(restr.groups[i] for i in idx), restr.fixed_c1)
    data_p = data.permuted(perm)
    fit_p = maximize(data_p, config.replace(restriction=permuted_restr))
    cc = common_component(run_filter(data, fit.params), fit.params)[:, idx]
    cc_p = common_component(run_filter(data_p, fit_p.params), fit_p.params)
    return OrderShiftReport(
        restriction=restr.kind.value,
        perm=idx.tolist(),
        loglik_original=fit.total_loglik,
        loglik_permuted=fit_p.total_loglik,
        max_common_divergence=float(np.max(np.abs(cc - cc_p))),
    )


# ---------------------------------------------------------------------------
# 变换抽样与批量诊断
# ---------------------------------------------------------------------------
def sample_transforms(r: int, count: int, seed: int, kind: str = "general") -> list[np.ndarray]:
    """
    kind: general（I + 0.5 N(0,1)）、diagonal（对角 U(0.5, 2)，非标量）、rotation（正交）。
    条件数 >= 100 的抽样被拒绝。
    """
    if kind not in ("general", "diagonal", "rotation"):
        raise ConstraintViolation(f"unknown transform kind {kind!r}")
    rng = named_stream(seed, "transform", kind, r)
    out: list[np.ndarray] = []
    while len(out) < count:
        if kind == "general":
            t = np.eye(r) + 0.5 * rng.standard_normal((r, r))
        elif kind == "diagonal":
            d = rng.uniform(0.5, 2.0, size=r)
            if r > 1 and np.ptp(d) < 1e-3:
                continue
            t = np.diag(d)
        else:
            q, rr = np.linalg.qr(rng.standard_normal((r, r)))
            t = q * np.sign(np.diag(rr))
        if np.linalg.cond(t) < SAMPLE_CONDITION:
            out.append(t)
    return out


def sample_permutations(n: int, count: int, seed: int) -> list[np.ndarray]:
    rng = named_stream(seed, "permutation", n)
    return [rng.permutation(n) for _ in range(count)]


def run_diagnostics(
    data: PanelData,
    params: StaticParams,
    n_transforms: int = 10,
    n_permutations: int = 20,
    seed: int = 0,
    threads: int = 1,
) -> list[dict[str, Any]]:
    """
    diagnose 子命令的检查集合：
    beta ∈ {0,1} 下一般 T 的不变性、beta 对角 T 的非不变性与交换残差、标量 T、随机置换。
    """
    r = params.r
    general = sample_transforms(r, n_transforms, seed, "general")
    diagonal = sample_transforms(r, n_transforms, seed, "diagonal")
    jobs: list[tuple[Any, ...]] = []
    for rule in (0, 1):
        for t in general:
            jobs.append(("reparam", params.replace(beta=float(rule)), t, rule))
    for t in diagonal + [2.0 * np.eye(r)]:
        jobs.append(("reparam", params, t, 1))
    for perm in sample_permutations(params.n, n_permutations, seed):
        jobs.append(("perm", params, perm))

    def work(job: tuple[Any, ...]) -> dict[str, Any]:
        if job[0] == "perm":
            row = order_invariance_check(data, job[1], job[2]).to_row()
            row["T_matrix"] = ",".join(str(int(i) + 1) for i in job[2])
            return row
        _, p, t, rule = job
        return reparameterization_check(data, p, t, rule).to_row()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, jobs))
    return [work(job) for job in jobs]
