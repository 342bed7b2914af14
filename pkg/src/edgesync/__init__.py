"""Simulator for distributed deep-learning training on multi-level edge nodes."""

from ._accel import get_backend, set_backend
from .config import ScenarioConfig, load_preset, parse_config
from .engine import run_scenario, scaling_sweep
from .report import ScenarioReport, emit_report

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "ScenarioReport", "emit_report", "get_backend", "load_preset",
    "parse_config", "run_scenario", "scaling_sweep", "set_backend",
]
