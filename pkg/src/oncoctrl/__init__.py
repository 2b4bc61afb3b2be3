"""In-silico chemo/immunotherapy scheduling toolkit.

Flatness-based dose planning on a two-state tumor/immune virtual patient,
robustified against unknown drug-delivery fluctuations by a model-free
(ultra-local model + intelligent-P) feedback loop.
"""

from oncoctrl.engine import (
    SCENARIO_PRESETS,
    ScenarioConfig,
    SimulationAbort,
    SimulationRecord,
    compare_records,
    integrate_step,
    open_loop_variant,
    run_scenario,
    scenario_preset,
)
from oncoctrl.mfc import (
    LoopHistory,
    UltraLocalConfig,
    compose_closed_loop,
    estimate_F,
    ip_control,
    mfc_step,
)
from oncoctrl.patient import (
    BasinLabel,
    EquilibriumSearchError,
    EquilibriumSet,
    PARAM_PRESETS,
    PatientParams,
    PatientState,
    PositivityError,
    classify_basin,
    find_equilibria,
    jacobian_fd,
    rhs,
)
from oncoctrl.planner import (
    OpenLoopSchedule,
    ReferenceTrajectory,
    ShootingCriteria,
    clip_schedule,
    flat_inverse,
    plan_reference,
    shoot,
)

__version__ = "0.1.0"

__all__ = [
    "BasinLabel",
    "EquilibriumSearchError",
    "EquilibriumSet",
    "LoopHistory",
    "OpenLoopSchedule",
    "PARAM_PRESETS",
    "PatientParams",
    "PatientState",
    "PositivityError",
    "ReferenceTrajectory",
    "SCENARIO_PRESETS",
    "ScenarioConfig",
    "ShootingCriteria",
    "SimulationAbort",
    "SimulationRecord",
    "UltraLocalConfig",
    "classify_basin",
    "clip_schedule",
    "compare_records",
    "compose_closed_loop",
    "estimate_F",
    "find_equilibria",
    "flat_inverse",
    "integrate_step",
    "ip_control",
    "jacobian_fd",
    "mfc_step",
    "open_loop_variant",
    "plan_reference",
    "rhs",
    "run_scenario",
    "scenario_preset",
    "shoot",
    "__version__",
]
