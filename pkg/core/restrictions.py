"""
载荷约束目录：Full / LT / GroupLT / GroupCommon / TwoFactorGroup。
build_mask 把约束展开成逐元素掩码；绑定元素共享一个自由值（一对多展开），
优化器只看到最小参数化。count_free_params 给出 AIC/BIC 与 LR 检验用的自由度。
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Any, Sequence

import numpy as np

from .errors import ConstraintViolation, IncompatibleShape
from .schemas import TvMode


class RestrictionKind(str, Enum):
    FULL = "full"
    LT = "lt"
    GROUP_LT = "group_lt"
    GROUP_COMMON = "group_common"
    TWO_FACTOR_GROUP = "two_factor_group"

    @classmethod
    def parse(cls, value: "str | RestrictionKind") -> "RestrictionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConstraintViolation(
                f"unknown restriction {value!r}; expected one of {[k.value for k in cls]}"
            ) from None


_ALIASES = {
    "gs_lt": "group_lt",
    "gslt": "group_lt",
    "gs": "group_common",
    "2f_gs": "two_factor_group",
    "2fgs": "two_factor_group",
    "lower_triangular": "lt",
}

_GROUPED = {RestrictionKind.GROUP_LT, RestrictionKind.GROUP_COMMON, RestrictionKind.TWO_FACTOR_GROUP}


class MaskCode(IntEnum):
    FREE = 0
    ZERO = 1
    ONE = 2
    TIED = 3


@dataclass(frozen=True)
class LoadingRestriction:
    kind: RestrictionKind = RestrictionKind.FULL
    groups: tuple[int, ...] | None = None
    fixed_c1: bool | None = None

    def __post_init__(self) -> None:
        kind = RestrictionKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        expected = kind is not RestrictionKind.LT
        if self.fixed_c1 is None:
            object.__setattr__(self, "fixed_c1", expected)
        elif bool(self.fixed_c1) != expected:
            raise ConstraintViolation(
                f"{kind.value} restriction requires fixed_c1={expected}, got {self.fixed_c1}"
            )

        if kind in _GROUPED:
            if self.groups is None:
                raise ConstraintViolation(f"{kind.value} restriction needs a group per series")
            groups = tuple(int(g) for g in self.groups)
            p = max(groups)
            if min(groups) < 1 or set(groups) != set(range(1, p + 1)):
                raise ConstraintViolation(f"group labels must cover 1..p without gaps, got {sorted(set(groups))}")
            object.__setattr__(self, "groups", groups)
        elif self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))

    @property
    def p(self) -> int:
        return max(self.groups) if self.groups else 0

    def required_r(self) -> int | None:
        if self.kind is RestrictionKind.GROUP_LT:
            return self.p
        if self.kind is RestrictionKind.GROUP_COMMON:
            return self.p + 1
        if self.kind is RestrictionKind.TWO_FACTOR_GROUP:
            return 2
        return None

    def validate(self, n: int, r: int) -> None:
        if not n >= r >= 1:
            raise IncompatibleShape(f"need n >= r >= 1, got n={n}, r={r}")
        need = self.required_r()
        if need is not None and r != need:
            raise IncompatibleShape(f"{self.kind.value} with p={self.p} groups needs r={need}, got r={r}")
        if self.kind in _GROUPED and len(self.groups) != n:
            raise IncompatibleShape(f"{len(self.groups)} group labels for {n} series")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "groups": None if self.groups is None else list(self.groups),
            "fixed_c1": self.fixed_c1,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LoadingRestriction":
        return cls(kind=data.get("kind", "full"), groups=data.get("groups"), fixed_c1=data.get("fixed_c1"))


@dataclass(frozen=True)
class LoadingMask:
    """
    codes[i, j] 为 MaskCode；tie[i, j] 为该元素对应的自由值编号（固定元素为 -1）。
    编号按列优先首次出现的顺序分配，因此 Full 约束下 vec(tie) = 0..nr-1。
    """

    codes: np.ndarray
    tie: np.ndarray
    n_free: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    def expand(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_free:
            raise IncompatibleShape(f"{theta.size} loading values for {self.n_free} free parameters")
        lam = np.zeros(self.codes.shape)
        lam[self.codes == MaskCode.ONE] = 1.0
        live = self.tie >= 0
        lam[live] = theta[self.tie[live]]
        return lam

    def compress(self, lam: np.ndarray) -> np.ndarray:
        """每个自由值取其成员的平均（绑定元素即组内平均）。"""
        lam = np.asarray(lam, dtype=float)
        live = self.tie >= 0
        sums = np.bincount(self.tie[live], weights=lam[live], minlength=self.n_free)
        counts = np.bincount(self.tie[live], minlength=self.n_free)
        return sums / counts

    def project(self, lam: np.ndarray) -> np.ndarray:
        return self.expand(self.compress(lam))

    def tie_vec(self) -> np.ndarray:
        """列优先的 tie 编号，供时变载荷递推使用。"""
        return np.ascontiguousarray(self.tie.flatten(order="F"), dtype=np.int64)

    def count(self, code: MaskCode) -> int:
        return int(np.sum(self.codes == code))


def full_mask(n: int, r: int) -> LoadingMask:
    return build_mask(LoadingRestriction(RestrictionKind.FULL), n, r)


def build_mask(restr: LoadingRestriction, n: int, r: int) -> LoadingMask:
    restr.validate(n, r)
    codes = np.full((n, r), MaskCode.FREE, dtype=np.int64)
    # 绑定键：同键元素共享一个自由值
    keys: list[list[Any]] = [[None] * r for _ in range(n)]
    kind = restr.kind

    if kind is RestrictionKind.FULL:
        for i in range(n):
            for j in range(r):
                keys[i][j] = ("free", i, j)
    elif kind is RestrictionKind.LT:
        for i in range(n):
            for j in range(r):
                if i < r and j > i:
                    codes[i, j] = MaskCode.ZERO
                elif i < r and j == i:
                    codes[i, j] = MaskCode.ONE
                else:
                    keys[i][j] = ("free", i, j)
    else:
        groups = restr.groups
        for i in range(n):
            g = groups[i]
            for j in range(r):
                key = None
                if kind is RestrictionKind.GROUP_LT:
                    # 第 g 组只载荷在前 g 个因子上
                    key = ("group", g, j) if j < g else None
                elif kind is RestrictionKind.GROUP_COMMON:
                    if j == 0:
                        key = ("common", 0)
                    elif j == g:
                        key = ("group", g, j)
                else:
                    key = ("common", 0) if j == 0 else ("group", g, 1)
                if key is None:
                    codes[i, j] = MaskCode.ZERO
                else:
                    codes[i, j] = MaskCode.TIED
                    keys[i][j] = key

    tie = np.full((n, r), -1, dtype=np.int64)
    index: dict[Any, int] = {}
    for j in range(r):
        for i in range(n):
            key = keys[i][j]
            if key is not None:
                tie[i, j] = index.setdefault(key, len(index))
    return LoadingMask(codes=codes, tie=tie, n_free=len(index))


def count_free_params(
    restr: LoadingRestriction,
    n: int,
    r: int,
    shared_b: bool = True,
    tv_mode: TvMode | str | None = None,
) -> int:
    """
    自由载荷 + c（fixed_c1 时少一个）+ 对角 A (r) + B（共享 1 / 对角 r）+ Sigma (n) + nu (1)。
    时变载荷：ScalarTargeted 在静态基础上多 A_l、B_l 两个标量；
    DiagonalSharedC 不含静态载荷，改计共享 c_l 与对角 A_l、B_l（各 n*r 个）。
    """
    mask = build_mask(restr, n, r)
    factor_part = (r - int(restr.fixed_c1)) + r + (1 if shared_b else r) + n + 1
    if tv_mode is None:
        return mask.n_free + factor_part
    mode = TvMode(tv_mode)
    if mode is TvMode.SCALAR_TARGETED:
        return mask.n_free + factor_part + 2
    if restr.kind is not RestrictionKind.FULL:
        raise ConstraintViolation("diagonal_shared_c loading dynamics are only defined for the full restriction")
    return factor_part + 1 + 2 * n * r


def groups_from_labels(labels: Sequence[Any]) -> tuple[int, ...]:
    """把任意组标签按首次出现顺序映射为 1..p。"""
    order: dict[Any, int] = {}
    return tuple(order.setdefault(lab, len(order) + 1) for lab in labels)
