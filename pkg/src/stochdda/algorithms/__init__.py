from .baselines import constant_step, inv_sqrt_step, run_cdda, run_dsm, run_p2d2, run_pg_extra
from .centralized import (
    CentralizedTrace,
    ReferenceNotConverged,
    ReferenceSolution,
    centralized_da,
    sigma_squared,
    solve_reference,
)
from .dda import DDAState, NumericalError, dda_round, run_dda, y_sequence_step
from .schedule import ScheduleOverflowError, StepSchedule, safe_horizon
from .trace import COLUMNS, RunTrace

__all__ = [
    "COLUMNS",
    "CentralizedTrace",
    "DDAState",
    "NumericalError",
    "ReferenceNotConverged",
    "ReferenceSolution",
    "RunTrace",
    "ScheduleOverflowError",
    "StepSchedule",
    "centralized_da",
    "constant_step",
    "dda_round",
    "inv_sqrt_step",
    "run_cdda",
    "run_dda",
    "run_dsm",
    "run_p2d2",
    "run_pg_extra",
    "safe_horizon",
    "sigma_squared",
    "solve_reference",
    "y_sequence_step",
]
