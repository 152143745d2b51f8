"""Configuration-driven experiments, result files and figures."""

from .config import AgentConfig, ConfigError, ExperimentConfig, GridConfig, lambda_mesh, load_config
from .runner import (
    ResultSet,
    RunFailure,
    exact_two_state_figure,
    run_experiment,
    run_misspecification_grid,
    write_results,
)

__all__ = [
    "AgentConfig", "ConfigError", "ExperimentConfig", "GridConfig", "ResultSet", "RunFailure",
    "exact_two_state_figure", "lambda_mesh", "load_config", "run_experiment",
    "run_misspecification_grid", "write_results",
]
