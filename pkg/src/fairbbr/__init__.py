"""Packet-level simulation of BBR and shared-bottleneck coupled BBR, with latency models."""

from .kernels import BACKEND
from .scenario import ScenarioConfig, default_config, fairness_config, load_config, run_scenario

__version__ = "0.1.0"

__all__ = ["BACKEND", "ScenarioConfig", "default_config", "fairness_config", "load_config", "run_scenario"]
