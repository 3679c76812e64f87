"""
命名随机流：所有随机性都从一个 seed 派生。
每个工作单元（restart、replication、变换抽样）用名字 + 索引哈希出独立的流，
因此并发度不改变结果。
"""
from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *names: object) -> list[int]:
    digest = hashlib.sha256(":".join(str(x) for x in (seed, *names)).encode("utf-8")).digest()
    # SeedSequence 接受 32 位整数列表
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def named_stream(seed: int, *names: object) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(stream_key(seed, *names)))


def derived_seed(seed: int, *names: object) -> int:
    """供需要整数 seed 的下游（如 sample_path）使用。"""
    return stream_key(seed, *names)[0]
