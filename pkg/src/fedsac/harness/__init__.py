"""Experiment orchestration: configs, runners, output files and the CLI."""

from .config import ExperimentConfig, load_config, parse_config
from .outputs import emit_outputs
from .runner import (
    History,
    RoundRecord,
    run,
    run_complementarity_sweep,
    run_fedavg,
    run_fedsac,
    run_hetero_arch,
    run_local,
)

__all__ = [
    "ExperimentConfig", "History", "RoundRecord", "emit_outputs", "load_config", "parse_config",
    "run", "run_complementarity_sweep", "run_fedavg", "run_fedsac", "run_hetero_arch", "run_local",
]
