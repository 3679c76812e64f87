"""
PanelData：观测面板的统一容器（T x n），全流程唯一持有者。
负责 CSV 读取、标准化与反标准化、窗口切片和序列置换。
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, MalformedPanel
from .matops import permutation_indices


@dataclass(frozen=True)
class PanelData:
    """观测面板。standardized 为真时 means / stds 记录原始尺度。"""

    y: np.ndarray
    labels: tuple[str, ...] = ()
    dates: tuple[str, ...] | None = None
    standardized: bool = False
    means: np.ndarray | None = None
    stds: np.ndarray | None = None

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if y.ndim != 2:
            raise DimensionMismatch(f"panel must be T x n, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            row, col = np.argwhere(~np.isfinite(y))[0]
            raise MalformedPanel(f"non-finite value at row {row + 1}, column {col + 1}")
        if y.shape[0] < 1:
            raise MalformedPanel("panel has no observations")
        labels = tuple(self.labels) or tuple(f"y{i + 1}" for i in range(y.shape[1]))
        if len(labels) != y.shape[1]:
            raise DimensionMismatch(f"{len(labels)} labels for {y.shape[1]} series")
        if self.dates is not None and len(self.dates) != y.shape[0]:
            raise DimensionMismatch(f"{len(self.dates)} dates for {y.shape[0]} observations")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "labels", labels)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    # ── 读取 ──
    @classmethod
    def from_csv(cls, path: str | Path, standardize: bool = False) -> "PanelData":
        """
        首行为序列名；可选首列名为 "date"（ISO-8601）；其余单元格必须为数值且无缺失。
        缺失或非数值单元格报 MalformedPanel，并给出行号（不含表头，从 1 起）和列名。
        """
        path = Path(path)
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise MalformedPanel(f"cannot read {path}: {e}") from e

        dates = None
        if len(frame.columns) and str(frame.columns[0]).strip().lower() == "date":
            dates = tuple(frame.iloc[:, 0].astype(str))
            frame = frame.iloc[:, 1:]
        if frame.shape[1] == 0:
            raise MalformedPanel(f"{path} has no data columns")

        values = np.empty(frame.shape)
        for j, col in enumerate(frame.columns):
            cells = frame[col].str.strip()
            numeric = pd.to_numeric(cells, errors="coerce")
            bad = numeric.isna().to_numpy()
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raw = cells.iloc[row]
                what = "missing value" if raw == "" else f"non-numeric value {raw!r}"
                raise MalformedPanel(f"{what} at row {row + 1}, column {j + 1} ({col})")
            values[:, j] = numeric.to_numpy(dtype=float)

        panel = cls(y=values, labels=tuple(str(c) for c in frame.columns), dates=dates)
        if panel.T < 2:
            raise MalformedPanel(f"{path} needs at least 2 observations, found {panel.T}")
        return panel.standardize() if standardize else panel

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.y, columns=list(self.labels))
        if self.dates is not None:
            frame.insert(0, "date", list(self.dates))
        return frame

    # ── 标准化 ──
    def standardize(self) -> "PanelData":
        if self.standardized:
            return self
        means = self.y.mean(axis=0)
        stds = self.y.std(axis=0, ddof=1) if self.T > 1 else np.ones(self.n)
        # 常数序列只去均值
        stds = np.where(stds > 0, stds, 1.0)
        return dataclasses.replace(
            self, y=(self.y - means) / stds, standardized=True, means=means, stds=stds
        )

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        """把标准化尺度上的 (.., n) 数组还原为原始尺度。"""
        values = np.asarray(values, dtype=float)
        if not self.standardized:
            return values
        return values * self.stds + self.means

    # ── 切片 / 置换 ──
    def window(self, start: int, stop: int) -> "PanelData":
        """0 基半开区间 [start, stop)；标准化元数据原样保留。"""
        dates = None if self.dates is None else self.dates[start:stop]
        return dataclasses.replace(self, y=self.y[start:stop], dates=dates)

    def with_values(self, y: np.ndarray) -> "PanelData":
        return dataclasses.replace(self, y=y)

    def permuted(self, perm: Sequence[int]) -> "PanelData":
        """返回 P y：第 i 列取原来的第 perm[i] 列。"""
        idx = permutation_indices(perm)
        if idx.size != self.n:
            raise DimensionMismatch(f"permutation of length {idx.size} for {self.n} series")
        return dataclasses.replace(
            self,
            y=self.y[:, idx],
            labels=tuple(self.labels[i] for i in idx),
            means=None if self.means is None else self.means[idx],
            stds=None if self.stds is None else self.stds[idx],
        )
