"""
项目根 conftest：把仓库根加入 sys.path，并在未设置 SDFM_RUN_SLOW=1 时跳过 slow 用例。
"""
from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_collection_modifyitems(config, items):
    if os.getenv("SDFM_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; set SDFM_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
