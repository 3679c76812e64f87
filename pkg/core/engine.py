"""
多起点调度：每个 restart 是一个独立工作单元，线程池并发执行。
失败的 restart 按 degradation 策略处理："skip" 记录后跳过，"fail" 立即中止。
全部失败时抛出 AllRestartsFailed。
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AllRestartsFailed, SdfmError

logger = logging.getLogger(__name__)


@dataclass
class RestartOutcome:
    index: int
    x: np.ndarray | None = None
    loglik: float = -math.inf
    converged: bool = False
    iterations: int = 0
    trace: list[float] = field(default_factory=list)
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.loglik)


class RestartEngine:
    """并发执行 run_one(index, x0)，按 index 排序返回结果。"""

    def __init__(
        self,
        run_one: Callable[[int, np.ndarray], RestartOutcome],
        threads: int = 1,
        max_retries: int = 1,
        degradation: str = "skip",
    ):
        if degradation not in ("skip", "fail"):
            raise ValueError(f"degradation must be 'skip' or 'fail', got {degradation!r}")
        self.run_one = run_one
        self.threads = max(1, int(threads))
        self.max_retries = max(1, int(max_retries))
        self.degradation = degradation

    def _attempt(self, index: int, x0: np.ndarray) -> RestartOutcome:
        last_error = None
        for attempt in range(self.max_retries):
            try:
                out = self.run_one(index, x0)
                if out.ok:
                    logger.debug("restart %d finished: loglik=%.6f, iterations=%d", index, out.loglik, out.iterations)
                    return out
                last_error = out.error or {"message": "objective is -inf"}
            except (SdfmError, ArithmeticError, np.linalg.LinAlgError, ValueError) as e:
                last_error = {"message": str(e), "type": type(e).__name__}
            last_error = {"restart": index, "attempt": attempt + 1, **last_error}
        logger.warning("restart %d failed: %s", index, last_error.get("message"))
        return RestartOutcome(index=index, error=last_error)

    def run(self, starts: list[np.ndarray]) -> list[RestartOutcome]:
        if self.threads == 1 or len(starts) == 1:
            outcomes = [self._attempt(k, x0) for k, x0 in enumerate(starts)]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(self._attempt, k, x0) for k, x0 in enumerate(starts)]
                outcomes = [f.result() for f in futures]
        outcomes.sort(key=lambda o: o.index)

        failures = [o.error for o in outcomes if not o.ok]
        if failures and self.degradation == "fail":
            raise AllRestartsFailed(failures)
        if len(failures) == len(outcomes):
            raise AllRestartsFailed(failures)
        return outcomes
