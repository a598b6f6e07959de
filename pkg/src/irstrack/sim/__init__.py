"""End-to-end tracking experiments: schedules, trajectories, schemes and campaigns."""

from .campaign import CampaignResult, SummaryRow, mc_campaign, prediction_error_series, transition_recovery
from .config import RunConfig, dbm_to_watt
from .scenario import Scenario, snr_and_rate, user_combining
from .schedule import TimeBlockSchedule, build_schedule, overhead_ratio
from .schemes import (
    MetricsRecord,
    RunResult,
    run_focusing_baseline,
    run_hierarchical_baseline,
    run_perfect_codeword_baseline,
    run_ut_scheme,
)
from .trajectory import Trajectory, generate_trajectory

__all__ = [
    "CampaignResult",
    "MetricsRecord",
    "RunConfig",
    "RunResult",
    "Scenario",
    "SummaryRow",
    "TimeBlockSchedule",
    "Trajectory",
    "build_schedule",
    "dbm_to_watt",
    "generate_trajectory",
    "mc_campaign",
    "overhead_ratio",
    "prediction_error_series",
    "run_focusing_baseline",
    "run_hierarchical_baseline",
    "run_perfect_codeword_baseline",
    "run_ut_scheme",
    "snr_and_rate",
    "transition_recovery",
    "user_combining",
]
