"""Configuration-driven runs and the ``esr`` command line."""

from .config import ConfigError, ScenarioConfig, load, loads, parse_config
from .runner import bchsh_sweep, bound_search, resolve_seed, run_analytic, run_monte_carlo

__all__ = [
    "ConfigError", "ScenarioConfig", "load", "loads", "parse_config",
    "bchsh_sweep", "bound_search", "resolve_seed", "run_analytic", "run_monte_carlo",
]
