"""
最大似然估计：参数打包（无约束化）、PCA + AR(1) 初值、BFGS + 中心差分梯度、多起点。

打包变换：Sigma = exp(θ)，nu = 2 + exp(θ)（上限 200），B 对角元 = tanh(θ)，
A 对角元、自由载荷、自由 c 不做变换；fixed_c1 时 c_1 不进入向量，解包恢复为 1。
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize

from .context import PanelData
from .engine import RestartEngine, RestartOutcome
from .errors import (
    ConfigError,
    ConstraintViolation,
    NumericalError,
    RankDeficientData,
)
from .filter import run_filter
from .restrictions import LoadingRestriction, RestrictionKind, build_mask, count_free_params
from .schemas import StaticParams, TvMode, TvParams, params_from_dict, vec
from .tv_filter import default_tv_init, run_tv_filter
from .variants import NU, POS, RAW, UNIT, clamp_to_domain, pick_best, restart_starts

logger = logging.getLogger(__name__)

NU_CAP = 200.0
NU_START = 8.0
B_START = 0.95
A_FLOOR = 0.01
SMALL_A = 1e-4
GTOL = 1e-5
FTOL_REL = 1e-9
_FAIL_PENALTY = 1e12


# ---------------------------------------------------------------------------
# 配置与结果
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EstimationConfig:
    restriction: LoadingRestriction = field(default_factory=LoadingRestriction)
    r: int = 1
    shared_b: bool = True
    max_iterations: int = 500
    gradient_step: float = 1e-6
    restarts: int = 3
    perturbation_scale: float = 0.25
    seed: int = 0
    beta: float = 0.5
    model: str = "static"
    tv_mode: TvMode = TvMode.SCALAR_TARGETED
    threads: int = 1

    def __post_init__(self) -> None:
        if isinstance(self.restriction, dict):
            object.__setattr__(self, "restriction", LoadingRestriction.from_dict(self.restriction))
        elif not isinstance(self.restriction, LoadingRestriction):
            object.__setattr__(self, "restriction", LoadingRestriction(self.restriction))
        object.__setattr__(self, "tv_mode", TvMode(self.tv_mode))
        if self.r < 1:
            raise ConfigError(f"r must be at least 1, got {self.r}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be at least 1, got {self.restarts}")
        if not 0.0 <= self.perturbation_scale <= 0.5:
            raise ConfigError(f"perturbation_scale must lie in [0, 0.5], got {self.perturbation_scale}")
        if not self.gradient_step > 0:
            raise ConfigError(f"gradient_step must be positive, got {self.gradient_step}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.model not in ("static", "tv"):
            raise ConfigError(f"model must be 'static' or 'tv', got {self.model!r}")

    def replace(self, **changes: Any) -> "EstimationConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["restriction"] = self.restriction.to_dict()
        out["tv_mode"] = self.tv_mode.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown estimation settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EstimationResult:
    params: StaticParams | TvParams
    total_loglik: float
    free_param_count: int
    converged: bool
    iterations: int
    objective_trace: list[float]
    restriction: LoadingRestriction
    n_obs: int
    model: str = "static"
    l_init: np.ndarray | None = None
    g_init: np.ndarray | None = None
    restart_logliks: list[float] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "params": self.params.to_dict(),
            "restriction": self.restriction.to_dict(),
            "loglik": self.total_loglik,
            "free_params": self.free_param_count,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
            "objective_trace": list(self.objective_trace),
            "restart_logliks": [x if math.isfinite(x) else None for x in self.restart_logliks],
            "failures": list(self.failures),
            "l_init": None if self.l_init is None else self.l_init.tolist(),
            "g_init": None if self.g_init is None else self.g_init.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimationResult":
        return cls(
            params=params_from_dict(data["params"]),
            total_loglik=float(data["loglik"]),
            free_param_count=int(data["free_params"]),
            converged=bool(data.get("converged", False)),
            iterations=int(data.get("iterations", 0)),
            objective_trace=list(data.get("objective_trace", [])),
            restriction=LoadingRestriction.from_dict(data.get("restriction", {})),
            n_obs=int(data["n_obs"]),
            model=data.get("model", "static"),
            l_init=None if data.get("l_init") is None else np.asarray(data["l_init"], dtype=float),
            g_init=None if data.get("g_init") is None else np.asarray(data["g_init"], dtype=float),
            restart_logliks=[-math.inf if x is None else x for x in data.get("restart_logliks", [])],
            failures=list(data.get("failures", [])),
        )


# ---------------------------------------------------------------------------
# 变换
# ---------------------------------------------------------------------------
def to_unconstrained(values: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    v = np.array(values, dtype=float)
    pos, unit, nu = kinds == POS, kinds == UNIT, kinds == NU
    if np.any(v[pos] <= 0):
        raise ConstraintViolation("variance parameters must be positive")
    if np.any(np.abs(v[unit]) >= 1):
        raise ConstraintViolation("autoregressive parameters must lie strictly inside (-1, 1)")
    if np.any(v[nu] <= 2):
        raise ConstraintViolation("nu must exceed 2")
    v[pos] = np.log(v[pos])
    v[unit] = np.arctanh(v[unit])
    v[nu] = np.log(v[nu] - 2.0)
    return v


def to_natural(theta: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ConstraintViolation("cannot unpack a non-finite parameter vector")
    v = theta.copy()
    pos, unit, nu = kinds == POS, kinds == UNIT, kinds == NU
    with np.errstate(over="ignore"):
        v[pos] = np.exp(theta[pos])
        v[nu] = 2.0 + np.exp(np.minimum(theta[nu], math.log(NU_CAP - 2.0)))
    v[unit] = np.tanh(theta[unit])
    if not np.all(np.isfinite(v)) or np.any(v[pos] == 0):
        raise ConstraintViolation("unpacked parameters left their domain")
    return v


# ---------------------------------------------------------------------------
# 打包器
# ---------------------------------------------------------------------------
class _FactorBlock:
    """c（除去固定的 c_1）、对角 A、B（共享或对角）、Sigma、nu。"""

    def __init__(self, n: int, r: int, fixed_c1: bool, shared_b: bool, prefix: str = ""):
        self.n, self.r, self.fixed_c1, self.shared_b = n, r, fixed_c1, shared_b
        first = 1 if fixed_c1 else 0
        names = [f"c{prefix}[{j + 1}]" for j in range(first, r)]
        kinds = [RAW] * (r - first)
        names += [f"A{prefix}[{j + 1},{j + 1}]" for j in range(r)]
        kinds += [RAW] * r
        names += [f"B{prefix}"] if shared_b else [f"B{prefix}[{j + 1},{j + 1}]" for j in range(r)]
        kinds += [UNIT] * (1 if shared_b else r)
        names += [f"Sigma[{i + 1}]" for i in range(n)] + ["nu"]
        kinds += [POS] * n + [NU]
        self.names, self.kinds = names, kinds

    @property
    def size(self) -> int:
        return len(self.names)

    def conform(self, c, a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = np.array(c, dtype=float)
        if self.fixed_c1:
            c[0] = 1.0
        a = np.diag(np.diag(a))
        d = np.diag(b)
        b = np.eye(self.r) * (d.mean() if self.shared_b else d)
        return c, a, b

    def values(self, c, a, b, sigma, nu) -> np.ndarray:
        if self.fixed_c1 and c[0] != 1.0:
            raise ConstraintViolation(f"restriction pins c_1 = 1, got {c[0]}")
        if np.any(a != np.diag(np.diag(a))) or np.any(b != np.diag(np.diag(b))):
            raise ConstraintViolation("estimation requires diagonal A and B")
        bd = np.diag(b)
        if self.shared_b and not np.all(bd == bd[0]):
            raise ConstraintViolation("shared_b requires equal diagonal entries of B")
        first = 1 if self.fixed_c1 else 0
        b_part = bd[:1] if self.shared_b else bd
        return np.concatenate([c[first:], np.diag(a), b_part, sigma, [nu]])

    def build(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
        r, n = self.r, self.n
        pos = 0
        first = 1 if self.fixed_c1 else 0
        c = np.ones(r)
        c[first:] = v[pos:pos + r - first]
        pos += r - first
        a = np.diag(v[pos:pos + r])
        pos += r
        nb = 1 if self.shared_b else r
        b = np.eye(r) * v[pos:pos + nb]
        pos += nb
        sigma = v[pos:pos + n]
        pos += n
        return c, a, b, sigma, float(v[pos])


class StaticPacker:
    """[自由载荷 | c | A | B | Sigma | nu] 的打包 / 解包。"""

    def __init__(self, restriction: LoadingRestriction, n: int, r: int, shared_b: bool = True, beta: float = 0.5):
        restriction.validate(n, r)
        self.restriction = restriction
        self.mask = build_mask(restriction, n, r)
        self.beta = beta
        self.factor = _FactorBlock(n, r, restriction.fixed_c1, shared_b)
        rep = {}
        for j in range(r):
            for i in range(n):
                p = self.mask.tie[i, j]
                if p >= 0:
                    rep.setdefault(int(p), f"Lambda[{i + 1},{j + 1}]")
        self.names = [rep[p] for p in range(self.mask.n_free)] + self.factor.names
        self.kinds = np.array([RAW] * self.mask.n_free + self.factor.kinds, dtype=np.int64)

    @property
    def size(self) -> int:
        return len(self.names)

    def conform(self, params: StaticParams) -> StaticParams:
        """把任意起点拉进约束族：载荷投影、c_1 置 1、A/B 取对角（共享时取均值）。"""
        c, a, b = self.factor.conform(params.c, params.A, params.B)
        b = np.diag(clamp_to_domain(np.diag(b), np.full(params.r, UNIT)))
        return params.replace(Lambda=self.mask.project(params.Lambda), c=c, A=a, B=b, beta=self.beta)

    def free_values(self, params: StaticParams) -> np.ndarray:
        if not np.allclose(self.mask.project(params.Lambda), params.Lambda, rtol=0.0, atol=1e-12):
            raise ConstraintViolation(f"loadings violate the {self.restriction.kind.value} restriction")
        return np.concatenate([
            self.mask.compress(params.Lambda),
            self.factor.values(params.c, params.A, params.B, params.Sigma, params.nu),
        ])

    def build(self, v: np.ndarray) -> StaticParams:
        k = self.mask.n_free
        c, a, b, sigma, nu = self.factor.build(v[k:])
        return StaticParams(c=c, A=a, B=b, Lambda=self.mask.expand(v[:k]), Sigma=sigma, nu=nu, beta=self.beta)

    def pack(self, params: StaticParams) -> np.ndarray:
        return to_unconstrained(self.free_values(params), self.kinds)

    def unpack(self, theta: np.ndarray) -> StaticParams:
        return self.build(to_natural(theta, self.kinds))


class TvPacker:
    """
    因子块同静态模型（不含载荷）；载荷块：
    ScalarTargeted -> [A_l, B_l] 两个标量，c_l 由 target_l 推出；
    DiagonalSharedC -> [共享 c_l | A_l (n*r) | B_l (n*r)]。
    """

    def __init__(
        self,
        restriction: LoadingRestriction,
        n: int,
        r: int,
        mode: TvMode,
        shared_b: bool = True,
        beta: float = 0.5,
        target_l: np.ndarray | None = None,
    ):
        restriction.validate(n, r)
        self.mode = TvMode(mode)
        if self.mode is TvMode.SCALAR_TARGETED and target_l is None:
            raise ConstraintViolation("scalar_targeted estimation needs target_l")
        if self.mode is TvMode.DIAGONAL_SHARED_C and restriction.kind is not RestrictionKind.FULL:
            raise ConstraintViolation("diagonal_shared_c loading dynamics are only defined for the full restriction")
        self.n, self.r, self.beta = n, r, beta
        self.target_l = None if target_l is None else np.asarray(target_l, dtype=float)
        self.factor = _FactorBlock(n, r, restriction.fixed_c1, shared_b, prefix="_g")
        nr = n * r
        if self.mode is TvMode.SCALAR_TARGETED:
            load_names, load_kinds = ["A_l", "B_l"], [RAW, UNIT]
        else:
            load_names = ["c_l"] + [f"A_l[{m + 1}]" for m in range(nr)] + [f"B_l[{m + 1}]" for m in range(nr)]
            load_kinds = [RAW] + [RAW] * nr + [UNIT] * nr
        self.names = self.factor.names + load_names
        self.kinds = np.array(self.factor.kinds + load_kinds, dtype=np.int64)

    @property
    def size(self) -> int:
        return len(self.names)

    def conform(self, params: TvParams) -> TvParams:
        c, a, b = self.factor.conform(params.c_g, params.A_g, params.B_g)
        b = np.diag(clamp_to_domain(np.diag(b), np.full(self.r, UNIT)))
        if self.mode is TvMode.SCALAR_TARGETED:
            b_l = float(clamp_to_domain(np.array([params.B_l.mean()]), np.array([UNIT]))[0])
            return TvParams.targeted(
                self.target_l, float(params.A_l.mean()), b_l, c, a, b, params.Sigma, params.nu, self.beta
            )
        b_l = clamp_to_domain(params.B_l, np.full(params.B_l.size, UNIT))
        return params.replace(
            c_l=np.full(params.c_l.size, params.c_l.mean()), B_l=b_l,
            c_g=c, A_g=a, B_g=b, beta=self.beta, mode=TvMode.DIAGONAL_SHARED_C, target_l=None,
        )

    def free_values(self, params: TvParams) -> np.ndarray:
        head = self.factor.values(params.c_g, params.A_g, params.B_g, params.Sigma, params.nu)
        if self.mode is TvMode.SCALAR_TARGETED:
            if np.ptp(params.A_l) != 0 or np.ptp(params.B_l) != 0:
                raise ConstraintViolation("scalar_targeted mode needs scalar A_l and B_l")
            return np.concatenate([head, [params.A_l[0], params.B_l[0]]])
        if np.ptp(params.c_l) != 0:
            raise ConstraintViolation("diagonal_shared_c mode needs one shared c_l")
        return np.concatenate([head, [params.c_l[0]], params.A_l, params.B_l])

    def build(self, v: np.ndarray) -> TvParams:
        k = self.factor.size
        c, a, b, sigma, nu = self.factor.build(v[:k])
        if self.mode is TvMode.SCALAR_TARGETED:
            return TvParams.targeted(self.target_l, v[k], v[k + 1], c, a, b, sigma, nu, self.beta)
        nr = self.n * self.r
        return TvParams(
            c_l=v[k], A_l=v[k + 1:k + 1 + nr], B_l=v[k + 1 + nr:k + 1 + 2 * nr],
            c_g=c, A_g=a, B_g=b, Sigma=sigma, nu=nu, beta=self.beta, mode=TvMode.DIAGONAL_SHARED_C,
        )

    def pack(self, params: TvParams) -> np.ndarray:
        return to_unconstrained(self.free_values(params), self.kinds)

    def unpack(self, theta: np.ndarray) -> TvParams:
        return self.build(to_natural(theta, self.kinds))


def pack(params: StaticParams, restriction: LoadingRestriction, shared_b: bool = True) -> np.ndarray:
    return StaticPacker(restriction, params.n, params.r, shared_b, params.beta).pack(params)


def unpack(
    theta: np.ndarray,
    restriction: LoadingRestriction,
    shape: tuple[int, int],
    shared_b: bool = True,
    beta: float = 0.5,
) -> StaticParams:
    n, r = shape
    return StaticPacker(restriction, n, r, shared_b, beta).unpack(theta)


# ---------------------------------------------------------------------------
# 初值
# ---------------------------------------------------------------------------
def ar1_fit(x: np.ndarray) -> tuple[float, float, float]:
    """OLS x_t = a + b x_{t-1} + u_t，返回 (a, b, sd(u))。"""
    x = np.asarray(x, dtype=float)
    design = np.column_stack([np.ones(x.size - 1), x[:-1]])
    coef, *_ = np.linalg.lstsq(design, x[1:], rcond=None)
    resid = x[1:] - design @ coef
    return float(coef[0]), float(coef[1]), float(resid.std(ddof=0))


def initialize(
    data: PanelData,
    restriction: LoadingRestriction,
    r: int,
    shared_b: bool = True,
    beta: float = 0.5,
) -> StaticParams:
    """
    前 r 个主成分给出 Lambda0（投影到约束上，绑定元素取组内平均）；
    对每个主成分拟合 AR(1)，截距作 c0、残差标准差作 A0（下限 0.01）；
    B0 = 0.95，Sigma0 为主成分回归残差方差，nu0 = 8。
    """
    y = data.y
    T, n = y.shape
    if T <= 10 * r:
        raise RankDeficientData(f"need T > 10*r observations for initialization, got T={T}, r={r}")
    restriction.validate(n, r)
    x = y - y.mean(axis=0)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    if s.size < r or s[r - 1] <= 1e-10 * s[0]:
        raise RankDeficientData(f"data have fewer than r={r} non-degenerate principal components")
    scale = s[:r] / math.sqrt(T)
    lam0 = vt[:r].T * scale
    # 每列最大绝对值元素为正，使初值确定
    flip = np.sign(lam0[np.argmax(np.abs(lam0), axis=0), np.arange(r)])
    lam0 = lam0 * flip
    pcs = x @ vt[:r].T / scale * flip

    c0, a0 = np.empty(r), np.empty(r)
    for j in range(r):
        c0[j], _, sd = ar1_fit(pcs[:, j])
        if sd < A_FLOOR:
            logger.warning("AR(1) residual sd of component %d is %.2e; flooring A0 at %.2f", j + 1, sd, A_FLOOR)
            sd = A_FLOOR
        a0[j] = sd
    if restriction.fixed_c1:
        c0[0] = 1.0

    resid = x - pcs @ lam0.T
    sigma0 = np.maximum(resid.var(axis=0), 1e-4)
    mask = build_mask(restriction, n, r)
    b0 = np.eye(r) * B_START
    return StaticParams(
        c=c0, A=np.diag(a0), B=b0, Lambda=mask.project(lam0), Sigma=sigma0, nu=NU_START, beta=beta
    )


# ---------------------------------------------------------------------------
# 优化
# ---------------------------------------------------------------------------
class _Objective:
    """θ -> 总对数似然；数值失败映射为 -inf。每个 restart 持有自己的实例。"""

    def __init__(self, evaluate: Callable[[np.ndarray], float]):
        self.evaluate = evaluate
        self._key: bytes | None = None
        self._value = -math.inf

    def __call__(self, theta: np.ndarray) -> float:
        key = theta.tobytes()
        if key == self._key:
            return self._value
        try:
            value = float(self.evaluate(theta))
        except (NumericalError, ConstraintViolation, ArithmeticError, np.linalg.LinAlgError):
            value = -math.inf
        if not math.isfinite(value):
            value = -math.inf
        self._key, self._value = key, value
        return value


def central_gradient(fun: Callable[[np.ndarray], float], theta: np.ndarray, step: float, f0: float) -> np.ndarray:
    """相对步长 h_i = step * max(|θ_i|, 1)；一侧失败时退回单侧差分。"""
    grad = np.zeros(theta.size)
    for i in range(theta.size):
        h = step * max(abs(theta[i]), 1.0)
        up = theta.copy()
        up[i] += h
        dn = theta.copy()
        dn[i] -= h
        fu, fd = fun(up), fun(dn)
        if math.isfinite(fu) and math.isfinite(fd):
            grad[i] = (fu - fd) / (2.0 * h)
        elif math.isfinite(fu):
            grad[i] = (fu - f0) / h
        elif math.isfinite(fd):
            grad[i] = (f0 - fd) / h
    return grad


def _optimize(evaluate: Callable[[np.ndarray], float], index: int, x0: np.ndarray, config: EstimationConfig) -> RestartOutcome:
    objective = _Objective(evaluate)
    f_start = objective(x0)
    if not math.isfinite(f_start):
        return RestartOutcome(index=index, error={"message": "objective is -inf at the starting point"})
    trace = [f_start]

    def fun(theta):
        value = objective(theta)
        return -value if math.isfinite(value) else _FAIL_PENALTY

    def jac(theta):
        f0 = objective(theta)
        if not math.isfinite(f0):
            return np.zeros(theta.size)
        return -central_gradient(objective, theta, config.gradient_step, f0)

    def callback(xk):
        trace.append(objective(xk))

    res = minimize(
        fun, x0, jac=jac, method="BFGS", callback=callback,
        options={"maxiter": config.max_iterations, "gtol": GTOL},
    )
    x = res.x if objective(res.x) >= f_start else x0
    loglik = objective(x)
    grad_norm = float(np.max(np.abs(res.jac))) if res.jac is not None else math.inf
    small_step = len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= FTOL_REL * max(1.0, abs(trace[-1]))
    return RestartOutcome(
        index=index,
        x=x,
        loglik=loglik,
        converged=bool(res.success or grad_norm < GTOL or small_step),
        iterations=int(res.nit),
        trace=trace,
    )


def _run_restarts(
    packer: StaticPacker | TvPacker,
    evaluate: Callable[[np.ndarray], float],
    start_values: np.ndarray,
    config: EstimationConfig,
    label: str,
) -> tuple[RestartOutcome, list[RestartOutcome]]:
    starts = restart_starts(
        start_values, packer.kinds, config.restarts, config.perturbation_scale, config.seed, label
    )
    thetas = [to_unconstrained(v, packer.kinds) for v in starts]
    engine = RestartEngine(lambda k, x0: _optimize(evaluate, k, x0, config), threads=config.threads)
    outcomes = engine.run(thetas)
    best = pick_best([o for o in outcomes if o.ok])
    return best, outcomes


def _warn_small_a(a: np.ndarray) -> None:
    small = np.flatnonzero(np.abs(np.diag(a)) < SMALL_A)
    if small.size:
        logger.warning(
            "estimated A has near-zero diagonal entries %s; the identification conditions may fail",
            (small + 1).tolist(),
        )


def maximize(data: PanelData, config: EstimationConfig, init: StaticParams | TvParams | None = None) -> EstimationResult:
    """
    BFGS（中心差分梯度）最大化对数似然，返回各起点中的最优。
    init 给定时作为 restart 0 的起点（热启动、蒙特卡洛扰动真值），否则用 PCA 初值。
    """
    if config.model == "tv":
        return maximize_tv(data, config, init=init if isinstance(init, TvParams) else None)
    n, r = data.n, config.r
    packer = StaticPacker(config.restriction, n, r, config.shared_b, config.beta)
    start = init if init is not None else initialize(data, config.restriction, r, config.shared_b, config.beta)
    start_values = packer.free_values(packer.conform(start))

    best, outcomes = _run_restarts(
        packer, lambda th: run_filter(data, packer.unpack(th)).total_loglik, start_values, config, "restart"
    )
    params = packer.unpack(best.x)
    total = run_filter(data, params).total_loglik
    _warn_small_a(params.A)
    return EstimationResult(
        params=params,
        total_loglik=total,
        free_param_count=count_free_params(config.restriction, n, r, config.shared_b),
        converged=best.converged,
        iterations=best.iterations,
        objective_trace=best.trace,
        restriction=config.restriction,
        n_obs=data.T,
        model="static",
        restart_logliks=[o.loglik for o in outcomes],
        failures=[o.error for o in outcomes if o.error],
    )


def maximize_tv(
    data: PanelData,
    config: EstimationConfig,
    static_fit: EstimationResult | None = None,
    init: TvParams | None = None,
    l_init: np.ndarray | None = None,
) -> EstimationResult:
    """
    ScalarTargeted：先拟合静态模型，target_l = vec(静态 Lambda)，只估 A_l、B_l 与因子参数。
    DiagonalSharedC：共享 c_l、对角 A_l / B_l；l_init 依次取传入值、静态载荷。
    """
    n, r = data.n, config.r
    mode = config.tv_mode
    static_config = config.replace(model="static")
    if init is None and static_fit is None:
        static_fit = maximize(data, static_config)

    if init is None:
        s = static_fit.params
        l_hat = vec(s.Lambda)
        if mode is TvMode.SCALAR_TARGETED:
            init = TvParams.targeted(l_hat, 0.01, 0.9, s.c, s.A, s.B, s.Sigma, s.nu, config.beta)
        else:
            init = TvParams(
                c_l=0.1 * l_hat.mean(), A_l=0.01, B_l=0.9, c_g=s.c, A_g=s.A, B_g=s.B,
                Sigma=s.Sigma, nu=s.nu, beta=config.beta, mode=TvMode.DIAGONAL_SHARED_C,
            )
            if l_init is None:
                l_init = l_hat

    if mode is TvMode.SCALAR_TARGETED:
        target = init.target_l
        if target is None:
            if static_fit is None:
                raise ConfigError("scalar_targeted estimation needs a target loading or a static fit")
            target = vec(static_fit.params.Lambda)
        packer = TvPacker(config.restriction, n, r, mode, config.shared_b, config.beta, target)
        l0 = target if l_init is None else np.asarray(l_init, dtype=float)
        mask = build_mask(config.restriction, n, r)
    else:
        packer = TvPacker(config.restriction, n, r, mode, config.shared_b, config.beta)
        l0 = default_tv_init(init) if l_init is None else np.asarray(l_init, dtype=float)
        mask = None

    start_values = packer.free_values(packer.conform(init))
    best, outcomes = _run_restarts(
        packer,
        lambda th: run_tv_filter(data, packer.unpack(th), l0, None, mask).total_loglik,
        start_values, config, "tv-restart",
    )
    params = packer.unpack(best.x)
    out = run_tv_filter(data, params, l0, None, mask)
    _warn_small_a(params.A_g)
    return EstimationResult(
        params=params,
        total_loglik=out.total_loglik,
        free_param_count=count_free_params(config.restriction, n, r, config.shared_b, mode),
        converged=best.converged,
        iterations=best.iterations,
        objective_trace=best.trace,
        restriction=config.restriction,
        n_obs=data.T,
        model="tv",
        l_init=np.asarray(l0, dtype=float).copy(),
        g_init=np.asarray(out.factors[0]).copy() if out.T else None,
        restart_logliks=[o.loglik for o in outcomes],
        failures=[o.error for o in outcomes if o.error],
    )
