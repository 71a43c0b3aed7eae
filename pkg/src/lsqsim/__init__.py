"""Deterministic discrete-time simulator for multi-dispatcher load
balancing over heterogeneous servers, with local-view (stale-queue)
policies, classic baselines, and a benchmark harness."""

from .engine import SimConfig, run_reference
from .harness import (
    PRESETS,
    RunCache,
    Scenario,
    build_config,
    get_scenario,
    run,
    run_sweep,
    write_csv,
    write_json,
)
from .metrics import MetricsReport, aggregate_reference, stability_estimate
from .policies import PolicySpec, parse_policy
from .processes import ArrivalSpec, ConfigError, ServiceSpec, capacity

__version__ = "0.1.0"

__all__ = [
    "ArrivalSpec",
    "ConfigError",
    "MetricsReport",
    "PRESETS",
    "PolicySpec",
    "RunCache",
    "Scenario",
    "ServiceSpec",
    "SimConfig",
    "aggregate_reference",
    "build_config",
    "capacity",
    "get_scenario",
    "parse_policy",
    "run",
    "run_reference",
    "run_sweep",
    "stability_estimate",
    "write_csv",
    "write_json",
    "__version__",
]
