"""Experiment configuration, sweeps and result emission."""
from .config import EXPERIMENTS, ExperimentConfig, from_mapping, load_config, validate
from .experiments import run_experiment
from .results import ResultRow, emit_results, read_rows, summarize

__all__ = ["EXPERIMENTS", "ExperimentConfig", "from_mapping", "load_config", "validate",
           "run_experiment", "ResultRow", "emit_results", "read_rows", "summarize"]
