"""Power allocation for parallel decode-and-forward relay networks."""

from ._backend import BACKEND
from .analytics import AnalyticReport, DivergenceError
from .config import ConfigError, ExperimentConfig, load_config, write_config
from .model import (ChannelRealization, ChannelStatistics, NetworkScenario,
                    ReliableSet, build_statistics, default_scenario)
from .montecarlo import SweepResult, TrialOutcome, run_sweep, run_trial
from .numerics import BracketError, NumericError, exp_integral_e1
from .strategies import (AllocationDecision, InfeasibleError, ocpa_allocate,
                         odpa_allocate, psm_decision, rrs_allocate,
                         solve_threshold, srm_allocate)

__all__ = [
    "AllocationDecision", "AnalyticReport", "BACKEND", "BracketError",
    "ChannelRealization", "ChannelStatistics", "ConfigError",
    "DivergenceError", "ExperimentConfig", "InfeasibleError",
    "NetworkScenario", "NumericError", "ReliableSet", "SweepResult",
    "TrialOutcome", "build_statistics", "default_scenario",
    "exp_integral_e1", "load_config", "ocpa_allocate", "odpa_allocate",
    "psm_decision", "rrs_allocate", "run_sweep", "run_trial",
    "solve_threshold", "srm_allocate", "write_config",
]
__version__ = "0.1.0"
