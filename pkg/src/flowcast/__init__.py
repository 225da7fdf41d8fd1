"""Traffic-flow forecasting with BIC-selected ARIMA models."""

from .arima import ArimaModel, ArimaOrder, FitConfig, fit, forecast, residuals, rolling_one_step, simulate_arima
from .evaluation import EvalReport, emit_report, rmse, run_comparison
from .flows import FlowSeries, Road, RoadNetwork, TrajectoryRecord, aggregate_flow, fill_missing, match_point
from .netsim import DemandProfile, Scenario, generate_grid_network, simulate_flows
from .selection import SelectionResult, bic, grid_search
from .series import TimeSeries, acf, difference, integrate, select_d

__version__ = "0.1.0"

__all__ = [
    "ArimaModel",
    "ArimaOrder",
    "DemandProfile",
    "EvalReport",
    "FitConfig",
    "FlowSeries",
    "Road",
    "RoadNetwork",
    "Scenario",
    "SelectionResult",
    "TimeSeries",
    "TrajectoryRecord",
    "acf",
    "aggregate_flow",
    "bic",
    "difference",
    "emit_report",
    "fill_missing",
    "fit",
    "forecast",
    "generate_grid_network",
    "grid_search",
    "integrate",
    "match_point",
    "residuals",
    "rmse",
    "rolling_one_step",
    "run_comparison",
    "select_d",
    "simulate_arima",
    "simulate_flows",
]
