"""Built-in scenario presets and the YAML config-file loader.

Config files are YAML mappings. Every key is optional and layers over a
base preset chosen with ``preset:`` (default ``baseline``); unknown keys are
errors. See ``docs/config-format.md`` for the full key list.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import yaml

from .core import ConfigError, PayoffConfig
from .engine import SimulationConfig, config_from_dict, format_roster, parse_roster
from .governance import GovernanceConfig

PRESET_NAMES = (
    "baseline",
    "strict_governance",
    "adaptive_governance",
    "adversarial_red_team",
    "misalignment_sweep",
    "threshold_dancer",
    "collusion_detection",
)

DISPLAY_NAMES = {
    "baseline": "Baseline",
    "strict_governance": "Strict Governance",
    "adaptive_governance": "Adaptive Governance",
    "adversarial_red_team": "Adversarial Red Team",
    "misalignment_sweep": "Misalignment Sweep",
    "threshold_dancer": "Threshold Dancer",
    "collusion_detection": "Collusion Detection",
}


class UnknownScenarioError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown scenario {self.name!r}; valid names: {', '.join(PRESET_NAMES)}"


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    config: SimulationConfig


# roster, tax, cb threshold (None = off), audit (None = off), decay, (s+, s-, h, theta, w_rep)
_TABLE = {
    "baseline": ("3H+1O+1D", 0.00, None, None, 1.00, (2.0, 1.0, 2.0, 0.5, 1.0)),
    "strict_governance": ("3H+2O+1D+1A", 0.10, 0.35, 0.25, 0.85, (2.5, 1.5, 3.0, 0.5, 1.5)),
    "adaptive_governance": ("4H+2O+1A", 0.05, 0.70, 0.10, 0.95, (2.0, 1.0, 2.0, 0.5, 1.0)),
    "adversarial_red_team": ("4H+2A+2AA", 0.05, 0.60, 0.15, 0.95, (3.0, 1.5, 2.5, 0.5, 2.0)),
    "misalignment_sweep": ("4H+2O+2A+1D+1C", 0.05, 0.70, 0.10, 0.95, (2.0, 1.0, 2.0, 0.5, 1.0)),
    "threshold_dancer": ("2H+3CR+3TD", 0.05, 0.80, 0.10, 0.95, (2.0, 1.0, 2.0, 0.5, 1.0)),
    "collusion_detection": ("3H+2O+3A", 0.05, 0.60, None, 0.95, (3.0, 1.5, 3.0, 0.5, 2.5)),
}

_RHO = {"misalignment_sweep": 0.3}
_COLLUSION = {"collusion_detection"}


def _build(name: str) -> SimulationConfig:
    roster, tax, cb, audit, decay, (s_pos, s_neg, harm, split, w_rep) = _TABLE[name]
    rho = _RHO.get(name, 0.0)
    governance = GovernanceConfig(
        tax_rate=tax,
        cb_enabled=cb is not None,
        cb_threshold=cb if cb is not None else 1.0,
        decay_rate=decay,
        audit_probability=audit if audit is not None else 0.0,
        collusion_enabled=name in _COLLUSION,
    )
    payoff = PayoffConfig(surplus_pos=s_pos, surplus_neg=s_neg, harm=harm, split=split,
                          rho_a=rho, rho_b=rho, rep_weight=w_rep, calibration_k=2.0)
    return SimulationConfig(scenario_name=name, epochs=20, steps_per_epoch=15,
                            roster=parse_roster(roster), payoff=payoff, governance=governance)


def load_preset(name: str) -> ScenarioPreset:
    if name not in _TABLE:
        raise UnknownScenarioError(name)
    return ScenarioPreset(name, _build(name))


def all_presets() -> list[ScenarioPreset]:
    return [load_preset(n) for n in PRESET_NAMES]


def config_from_mapping(data: dict) -> SimulationConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("", "config file must contain a mapping")
    data = dict(data)
    base_name = data.pop("preset", "baseline")
    base = load_preset(base_name).config
    return config_from_dict(data, base)


def load_config_file(path: Union[str, Path]) -> SimulationConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: not valid YAML ({exc})") from None
    return config_from_mapping(data)


def dump_config(config: SimulationConfig) -> str:
    """Fully resolved config as YAML; ``load_config_file`` reads it back equal."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=False)


def _fmt_optional(value: float, enabled: bool) -> str:
    return f"{value:.2f}" if enabled else "---"


def preset_row(preset: ScenarioPreset) -> list[str]:
    c = preset.config
    g, p = c.governance, c.payoff
    return [
        DISPLAY_NAMES.get(preset.name, preset.name),
        format_roster(c.roster),
        str(c.epochs),
        str(c.steps_per_epoch),
        f"{g.tax_rate:.2f}",
        _fmt_optional(g.cb_threshold, g.cb_enabled),
        _fmt_optional(g.audit_probability, g.audit_probability > 0),
        f"{g.decay_rate:.2f}",
        f"{p.surplus_pos:.1f}",
        f"{p.surplus_neg:.1f}",
        f"{p.harm:.1f}",
        f"{p.split:.1f}",
        f"{p.rep_weight:.1f}",
    ]


PRESET_COLUMNS = ["Scenario", "Agents", "Epochs", "Steps", "Tax", "CB", "Audit", "Decay",
                  "s+", "s-", "h", "theta", "w_rep"]


def presets_table() -> str:
    rows = [PRESET_COLUMNS] + [preset_row(p) for p in all_presets()]
    widths = [max(len(r[i]) for r in rows) for i in range(len(PRESET_COLUMNS))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)
