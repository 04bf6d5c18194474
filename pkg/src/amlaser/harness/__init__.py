"""Config-driven experiment runner, sweeps and the ``amlaser`` command."""
from .adiabatic import AdiabaticConfig, validate_adiabatic
from .config import ExperimentConfig, SweepConfig, load_experiment, parse_experiment, parse_sweep
from .runner import ReportBundle, SweepTable, run, sweep

__all__ = [
    "AdiabaticConfig",
    "ExperimentConfig",
    "ReportBundle",
    "SweepConfig",
    "SweepTable",
    "load_experiment",
    "parse_experiment",
    "parse_sweep",
    "run",
    "sweep",
    "validate_adiabatic",
]
