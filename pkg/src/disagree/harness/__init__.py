"""Experiment orchestration: configs, the online run loop, evaluation and comparison."""

from .config import OPTIMIZERS, ConfigError, RunConfig, load_config, parse_text, preset_path
from .evaluate import EvalSummary, eval_policy, load_agent, save_agent
from .runlog import COLUMNS, RunLog
from .runner import RunError, Runner, run_experiment

__all__ = [
    "COLUMNS", "ConfigError", "EvalSummary", "OPTIMIZERS", "RunConfig", "RunError", "RunLog", "Runner",
    "eval_policy", "load_agent", "load_config", "parse_text", "preset_path", "run_experiment", "save_agent",
]
