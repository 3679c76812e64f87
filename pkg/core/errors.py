"""
统一异常体系：每个异常族携带 CLI 退出码。
ConfigError -> 2，DataError -> 3，NumericalError -> 4。
"""
from __future__ import annotations


class SdfmError(Exception):
    """所有可预期失败的基类。"""

    exit_code = 4


# ---------------------------------------------------------------------------
# 配置类错误（exit 2）
# ---------------------------------------------------------------------------
class ConfigError(SdfmError):
    exit_code = 2


class IncompatibleShape(ConfigError):
    pass


class InvalidPermutation(ConfigError):
    pass


class ConstraintViolation(ConfigError):
    pass


class NestingViolation(ConfigError):
    pass


# ---------------------------------------------------------------------------
# 数据类错误（exit 3）
# ---------------------------------------------------------------------------
class DataError(SdfmError):
    exit_code = 3


class DimensionMismatch(DataError):
    pass


class RankDeficientData(DataError):
    pass


class MalformedPanel(DataError):
    pass


# ---------------------------------------------------------------------------
# 数值类错误（exit 4）
# ---------------------------------------------------------------------------
class NumericalError(SdfmError):
    exit_code = 4


class NotSymmetric(NumericalError):
    pass


class EigenvalueBelowFloor(NumericalError):
    def __init__(self, index: int, value: float, t: int | None = None):
        self.index = index
        self.value = value
        self.t = t
        where = f" at t={t}" if t is not None else ""
        super().__init__(f"eigenvalue {index} = {value:.3e} is below the floor{where}")


class NonFiniteState(NumericalError):
    def __init__(self, t: int):
        self.t = t
        super().__init__(f"non-finite filter state produced at t={t}")


class SingularTransform(NumericalError):
    pass


class AssumptionViolated(NumericalError):
    pass


class AllRestartsFailed(NumericalError):
    def __init__(self, failures: list[dict]):
        self.failures = failures
        super().__init__(f"all {len(failures)} restarts failed")


class ReplicationFailureRate(NumericalError):
    def __init__(self, failed: int, total: int):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} Monte Carlo replications failed (limit 5%)")
