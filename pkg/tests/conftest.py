"""共享夹具：低维 DGP、模拟面板、8 序列小面板。"""
from __future__ import annotations

import numpy as np
import pytest

from core.schemas import StaticParams
from labs.simulator import simulate_path, static_dgp, static_low_dim

FIXED_LAMBDA = np.array([
    [0.8, 0.2],
    [0.5, 0.9],
    [0.3, 0.6],
    [0.9, 0.4],
    [0.2, 0.7],
])


@pytest.fixture
def dgp_params() -> StaticParams:
    """c=(1, 0.1)，A=diag(0.1, 0.3)，B=diag(0.9, 0.7)，nu=5，Sigma=I/2，n=5，r=2。"""
    return static_low_dim(Lambda=FIXED_LAMBDA)


@pytest.fixture
def sim_path(dgp_params):
    return simulate_path(dgp_params, 500, seed=7)


@pytest.fixture
def sim_panel(sim_path):
    return sim_path.data


@pytest.fixture
def one_factor_params() -> StaticParams:
    return StaticParams(
        c=[1.0], A=[[0.3]], B=[[0.8]],
        Lambda=[[1.0], [0.6], [0.8]],
        Sigma=[0.4, 0.5, 0.3], nu=6.0, beta=0.5,
    )


@pytest.fixture
def wide_params() -> StaticParams:
    rng = np.random.default_rng(11)
    return static_dgp(n=8, sigma=0.5, Lambda=rng.uniform(0.0, 1.0, size=(8, 2)))


@pytest.fixture
def wide_panel(wide_params):
    return simulate_path(wide_params, 300, seed=3).data
