"""Power sector capacity expansion model with BEV coupling."""
from .fleet import FleetSpec, ProfileEntry, fleet_allocation
from .model import (InfeasibleProfileError, ModelConfig, ModelInputError, PowerModel, ProfileInput,
                    build_model, check_profile)
from .params import PowerParams, StorageParams, TechnologyParams, load_params
from .report import KpiReport, ModelInfeasibleError, SolutionReport, compute_kpis, extract_report, solve_model
from .timeseries import HourlyInputs, default_inputs

__all__ = [
    "FleetSpec", "ProfileEntry", "fleet_allocation", "InfeasibleProfileError", "ModelConfig",
    "ModelInputError", "PowerModel", "ProfileInput", "build_model", "check_profile", "PowerParams",
    "StorageParams", "TechnologyParams", "load_params", "KpiReport", "ModelInfeasibleError",
    "SolutionReport", "compute_kpis", "extract_report", "solve_model", "HourlyInputs", "default_inputs",
]
