"""hieralloc: hierarchical allocation of a scarce resource under shortage.

Splits a fixed supply across regions by blending stated demand with
forecast-driven ideal shares, solved in closed form, then caps allocations
at demand and redistributes the excess.  Ships the solver, a level/trend
forecaster, the staged pipeline, file/HTTP ingestion, a CLI and an HTTP
service.
"""
from .forecast import (
    ForecastResult,
    SmoothingParams,
    fit_forecast,
    forecast_region,
    forecast_scenario,
    ideal_allocation,
    ideal_weights,
)
from .ingest import (
    LoadError,
    SchemaError,
    TransportError,
    fetch_remote_history,
    load_case_history,
    load_demands,
    load_ideals,
    load_predicted,
)
from .model import (
    AllocationPlan,
    AllocationProblem,
    InputError,
    RegionRecord,
    Scenario,
    ScenarioConfig,
    SolverError,
    SolverResult,
    Violation,
    plan_from_dict,
    plan_to_dict,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .pipeline import (
    PipelineError,
    cap_and_redistribute,
    prepass_full_allocation,
    proportional_allocation,
    reoptimize_remaining,
    run_center_pipeline,
    run_district_pipeline,
    run_pipeline,
    run_proportional_pipeline,
)
from .solver import (
    ConvergenceError,
    DistrictProblem,
    lagrangian_residual,
    oracle_solve,
    solve_center_allocation,
    solve_district_allocation,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "AllocationProblem",
    "ConvergenceError",
    "DistrictProblem",
    "ForecastResult",
    "InputError",
    "LoadError",
    "PipelineError",
    "RegionRecord",
    "Scenario",
    "ScenarioConfig",
    "SchemaError",
    "SmoothingParams",
    "SolverError",
    "SolverResult",
    "TransportError",
    "Violation",
    "cap_and_redistribute",
    "fetch_remote_history",
    "fit_forecast",
    "forecast_region",
    "forecast_scenario",
    "ideal_allocation",
    "ideal_weights",
    "lagrangian_residual",
    "load_case_history",
    "load_demands",
    "load_ideals",
    "load_predicted",
    "oracle_solve",
    "plan_from_dict",
    "plan_to_dict",
    "prepass_full_allocation",
    "proportional_allocation",
    "reoptimize_remaining",
    "run_center_pipeline",
    "run_district_pipeline",
    "run_pipeline",
    "run_proportional_pipeline",
    "scenario_from_dict",
    "scenario_to_dict",
    "solve_center_allocation",
    "solve_district_allocation",
    "validate_scenario",
    "__version__",
]
