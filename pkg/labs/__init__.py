"""识别性检查、模拟、蒙特卡洛与预测评估。"""
from .evaluation import (
    ComparisonRow,
    ForecastResult,
    compare_fits,
    information_criteria,
    insample_mse,
    lr_test,
    rolling_forecast,
    white_noise_mse,
)
from .identification import (
    TransformReport,
    Verdict,
    commutation_residual,
    noninvariance_witness,
    order_invariance_check,
    reparameterization_check,
    reparameterize,
    scalar_normalization,
)
from .montecarlo import McDesign, McResult, run_mc
from .simulator import sample_path, simulate_path

__all__ = [
    "ComparisonRow",
    "ForecastResult",
    "compare_fits",
    "information_criteria",
    "insample_mse",
    "lr_test",
    "rolling_forecast",
    "white_noise_mse",
    "TransformReport",
    "Verdict",
    "commutation_residual",
    "noninvariance_witness",
    "order_invariance_check",
    "reparameterization_check",
    "reparameterize",
    "scalar_normalization",
    "McDesign",
    "McResult",
    "run_mc",
    "sample_path",
    "simulate_path",
]
