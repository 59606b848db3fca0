"""Deterministic simulation engine for heterogeneous multi-agent bandits
under adversarial reward corruption, with a seeded experiment harness."""

from .adversary import (Adversary, BudgetedTargetedAdversary, CorruptionLedger,
                        EpochFloodAdversary, GapFlipAdversary, make_adversary)
from .agents import (AgentState, EpochSchedule, build_schedule,
                     estimate_naive, estimate_weighted)
from .config import ExperimentConfig, load_config, load_sweep, validate_config
from .engine import RunResult, run_single
from .errors import (ConfigError, DraaError, DuplicateBroadcastError,
                     InvariantError, LedgerError)
from .model import BanditInstance, build_instance
from .runner import execute_run, run_experiment, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Adversary", "AgentState", "BanditInstance", "BudgetedTargetedAdversary",
    "ConfigError", "CorruptionLedger", "DraaError", "DuplicateBroadcastError",
    "EpochFloodAdversary", "EpochSchedule", "ExperimentConfig",
    "GapFlipAdversary", "InvariantError", "LedgerError", "RunResult",
    "build_instance", "build_schedule", "estimate_naive", "estimate_weighted",
    "execute_run", "load_config", "load_sweep", "make_adversary",
    "run_experiment", "run_single", "run_sweep", "validate_config",
    "__version__",
]
