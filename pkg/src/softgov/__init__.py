"""Deterministic multi-agent simulator with soft-label safety metrics and governance levers."""

from .core import (
    AgentState,
    Archetype,
    ArchetypeParams,
    ConfigError,
    DecayFactors,
    Observables,
    PayoffConfig,
    ProxyWeights,
    SoftInteraction,
)
from .engine import SimulationConfig, replay, run
from .governance import GovernanceConfig
from .metrics import EpochMetrics, RunSummary, SuccessCriteria
from .scenario import PRESET_NAMES, load_config_file, load_preset

__version__ = "0.1.0"

__all__ = [
    "AgentState", "Archetype", "ArchetypeParams", "ConfigError", "DecayFactors", "Observables",
    "PayoffConfig", "ProxyWeights", "SoftInteraction", "SimulationConfig", "replay", "run",
    "GovernanceConfig", "EpochMetrics", "RunSummary", "SuccessCriteria", "PRESET_NAMES",
    "load_config_file", "load_preset",
]
