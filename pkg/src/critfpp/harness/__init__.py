"""Experiment orchestration: configuration, statistics, runners and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import ExperimentResult, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "load_config", "parse_config",
           "run_experiment"]
