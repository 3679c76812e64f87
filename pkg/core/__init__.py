"""Score-driven factor model core."""
from .context import PanelData
from .estimator import EstimationConfig, EstimationResult, maximize, maximize_tv
from .filter import run_filter
from .orchestrator import (
    CompareReport,
    DiagnoseReport,
    EstimateReport,
    ForecastReport,
    MonteCarloReport,
    SimulateReport,
    run_compare,
    run_diagnose,
    run_estimate,
    run_forecast,
    run_montecarlo,
    run_simulate,
)
from .restrictions import LoadingRestriction, RestrictionKind
from .schemas import StaticParams, TvMode, TvParams
from .tv_filter import run_tv_filter
from . import schemas

__all__ = [
    "PanelData",
    "EstimationConfig",
    "EstimationResult",
    "maximize",
    "maximize_tv",
    "run_filter",
    "run_tv_filter",
    "LoadingRestriction",
    "RestrictionKind",
    "StaticParams",
    "TvParams",
    "TvMode",
    "SimulateReport",
    "EstimateReport",
    "ForecastReport",
    "MonteCarloReport",
    "DiagnoseReport",
    "CompareReport",
    "run_simulate",
    "run_estimate",
    "run_forecast",
    "run_montecarlo",
    "run_diagnose",
    "run_compare",
    "schemas",
]
