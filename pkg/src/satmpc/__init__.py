"""Learning-based supply-air-temperature MPC for multi-zone HVAC.

The package covers the full loop: a hybrid-mode zone model, Bayesian
constrained identification, an exhaustive mode planner with learned
corrections, a richer simulated plant to control, and a bootstrap
evaluation pipeline, all wired into the ``satmpc`` CLI.
"""

from ._kernels import backend_name
from .config import RunConfig, default_run_config, load_config
from .evaluation import (
    BootstrapResult,
    ComparisonReport,
    bootstrap_compare,
    compare_controllers,
    comfort_hour,
    day_energy,
    hourly_records,
    kernel_regression,
    records_from_traces,
)
from .planner import (
    Corrections,
    CostWeights,
    ModeSequence,
    PlanResult,
    plan,
    predict_one_step,
    rollout_sequence,
    update_corrections,
)
from .plant import (
    Plant,
    PlantConfig,
    default_controller,
    identify_from_trace,
    lbmpc_controller,
    reference_plant_config,
    reference_prior,
    run_identification_experiment,
)
from .sysid import (
    ExperimentSchedule,
    IdProblem,
    Prior,
    default_prior,
    experiment_schedule,
    identify_zones,
)
from .thermal import HybridModel, VavConfig, ZoneCoeffs, ZoneState
from .traces import TraceSet

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "ComparisonReport",
    "Corrections",
    "CostWeights",
    "ExperimentSchedule",
    "HybridModel",
    "IdProblem",
    "ModeSequence",
    "Plant",
    "PlanResult",
    "PlantConfig",
    "Prior",
    "RunConfig",
    "TraceSet",
    "VavConfig",
    "ZoneCoeffs",
    "ZoneState",
    "backend_name",
    "bootstrap_compare",
    "comfort_hour",
    "compare_controllers",
    "day_energy",
    "default_controller",
    "default_prior",
    "default_run_config",
    "experiment_schedule",
    "hourly_records",
    "identify_from_trace",
    "identify_zones",
    "kernel_regression",
    "lbmpc_controller",
    "load_config",
    "plan",
    "predict_one_step",
    "records_from_traces",
    "reference_plant_config",
    "reference_prior",
    "rollout_sequence",
    "run_identification_experiment",
    "update_corrections",
    "__version__",
]
