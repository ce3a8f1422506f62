"""Domain types shared across the simulator.

All value types are frozen dataclasses validated on construction; bad
fields raise :class:`ConfigError` carrying the offending field name so the
scenario loader can prefix it with a full path (``governance.tax_rate``).
``AgentState`` is the one mutable record and is only touched by the engine.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Optional


class ConfigError(ValueError):
    """A field failed validation. ``path`` is dotted, e.g. ``payoff.split``."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")

    def prefixed(self, prefix: str) -> "ConfigError":
        return ConfigError(f"{prefix}.{self.path}" if prefix else self.path, self.message)


def _finite(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(name, f"must be finite, got {value!r}")
    return value


def check_range(name: str, value: Any, lo: float = -math.inf, hi: float = math.inf,
                lo_open: bool = False, hi_open: bool = False) -> float:
    value = _finite(name, value)
    if value < lo or (lo_open and value == lo) or value > hi or (hi_open and value == hi):
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise ConfigError(name, f"{value!r} outside {left}{lo}, {hi}{right}")
    return value


def check_count(name: str, value: Any, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(name, f"{value!r} is below {minimum}")
    return value


def clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


class Archetype(str, Enum):
    """Agent archetypes, valued by their roster letter code."""

    HONEST = "H"
    OPPORTUNISTIC = "O"
    DECEPTIVE = "D"
    ADVERSARIAL = "A"
    ADAPTIVE_ADVERSARIAL = "AA"
    CAUTIOUS = "C"
    CAUTIOUS_RECIPROCATOR = "CR"
    THRESHOLD_DANCER = "TD"

    @classmethod
    def from_code(cls, code: str) -> "Archetype":
        try:
            return cls(code)
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ConfigError("roster", f"unknown archetype code {code!r} (valid: {valid})") from None


@dataclass(frozen=True)
class Observables:
    """Raw per-interaction signals produced by the initiator."""

    task_progress: float
    rework_count: int
    verifier_rejections: int
    tool_misuse_flags: int
    engagement_delta: float

    def __post_init__(self):
        object.__setattr__(self, "task_progress",
                           check_range("task_progress", self.task_progress, -1.0, 1.0))
        object.__setattr__(self, "engagement_delta",
                           check_range("engagement_delta", self.engagement_delta, -1.0, 1.0))
        check_count("rework_count", self.rework_count)
        check_count("verifier_rejections", self.verifier_rejections)
        check_count("tool_misuse_flags", self.tool_misuse_flags)

    @classmethod
    def saturating(cls, task_progress: float, rework_count: int, verifier_rejections: int,
                   tool_misuse_flags: int, engagement_delta: float) -> "Observables":
        """Build from raw draws, saturating the two real signals into [-1, 1]."""
        return cls(clamp(float(task_progress)), int(rework_count), int(verifier_rejections),
                   int(tool_misuse_flags), clamp(float(engagement_delta)))


@dataclass(frozen=True)
class ProxyWeights:
    task: float = 0.4
    rework: float = 0.2
    verifier: float = 0.2
    engagement: float = 0.2

    def __post_init__(self):
        for name in ("task", "rework", "verifier", "engagement"):
            object.__setattr__(self, name, check_range(name, getattr(self, name), 0.0))
        total = self.task + self.rework + self.verifier + self.engagement
        if abs(total - 1.0) > 1e-12:
            raise ConfigError("weights", f"must sum to 1, got {total!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.task, self.rework, self.verifier, self.engagement)

    @classmethod
    def from_sequence(cls, values) -> "ProxyWeights":
        values = list(values)
        if len(values) != 4:
            raise ConfigError("weights", f"expected 4 weights, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class DecayFactors:
    alpha_r: float = 0.3
    alpha_v: float = 0.4
    alpha_m: float = 0.5

    def __post_init__(self):
        for name in ("alpha_r", "alpha_v", "alpha_m"):
            object.__setattr__(self, name, check_range(name, getattr(self, name), 0.0, 1.0,
                                                       lo_open=True, hi_open=True))


@dataclass(frozen=True)
class PayoffConfig:
    surplus_pos: float = 2.0
    surplus_neg: float = 1.0
    harm: float = 2.0
    split: float = 0.5
    rho_a: float = 0.0
    rho_b: float = 0.0
    rep_weight: float = 1.0
    calibration_k: float = 2.0
    transfer: float = 0.0

    def __post_init__(self):
        for name in ("surplus_pos", "surplus_neg", "harm", "rep_weight"):
            object.__setattr__(self, name, check_range(name, getattr(self, name), 0.0))
        for name in ("split", "rho_a", "rho_b"):
            object.__setattr__(self, name, check_range(name, getattr(self, name), 0.0, 1.0))
        object.__setattr__(self, "calibration_k",
                           check_range("calibration_k", self.calibration_k, 0.0, lo_open=True))
        object.__setattr__(self, "transfer", _finite("transfer", self.transfer))


@dataclass(frozen=True)
class ArchetypeParams:
    """Generative and acceptance parameters for every archetype.

    Only the honest task distribution and the opportunist task/rework
    distributions are externally pinned; everything else is a tunable
    default collected here so overrides stay in one place.
    """

    leak_prob: float = 0.05

    honest_task_mean: float = 0.8
    honest_task_sd: float = 0.1
    honest_engage_mean: float = 0.3
    honest_engage_sd: float = 0.1

    opportunist_task_mean: float = 0.4
    opportunist_task_sd: float = 0.4
    opportunist_rework_rate: float = 1.0
    opportunist_engage_mean: float = 0.1
    opportunist_engage_sd: float = 0.2

    deceptive_task_mean: float = 0.0
    deceptive_task_sd: float = 0.1
    deceptive_engage_mean: float = 0.8
    deceptive_engage_sd: float = 0.1

    adversarial_task_mean: float = -0.6
    adversarial_task_sd: float = 0.2
    adversarial_rework_rate: float = 4.0
    adversarial_verifier_rate: float = 1.5
    adversarial_misuse_rate: float = 1.0
    adversarial_engage_mean: float = -0.3
    adversarial_engage_sd: float = 0.2

    cautious_task_mean: float = 0.7
    cautious_task_sd: float = 0.1

    dancer_epsilon: float = 0.02
    dancer_noise_sd: float = 0.02

    accept_threshold: float = 0.0
    cautious_accept_threshold: float = 0.2
    cautious_min_reputation: float = 0.0
    reciprocator_defect_below: float = 0.5

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name.endswith("_sd") or name.endswith("_rate"):
                object.__setattr__(self, name, check_range(name, value, 0.0))
            elif name in ("leak_prob", "reciprocator_defect_below"):
                object.__setattr__(self, name, check_range(name, value, 0.0, 1.0))
            elif name.endswith("_mean"):
                object.__setattr__(self, name, check_range(name, value, -1.0, 1.0))
            else:
                object.__setattr__(self, name, _finite(name, value))


@dataclass(frozen=True)
class SoftInteraction:
    """One proposed interaction, accepted or not, with everything it cost."""

    interaction_id: str
    epoch: int
    step: int
    initiator_id: str
    counterparty_id: str
    observables: Observables
    proxy_score: float
    soft_label: float
    accepted: bool
    transfer: float
    payoff_initiator: float
    payoff_counterparty: float
    hypothetical_payoff_initiator: float
    hypothetical_payoff_counterparty: float
    governance_cost_initiator: float
    governance_cost_counterparty: float
    rep_delta_initiator: float
    rep_delta_counterparty: float
    expected_surplus: float
    expected_harm: float
    audited: bool = False
    audit_violation: bool = False

    def __post_init__(self):
        check_count("epoch", self.epoch)
        check_count("step", self.step)
        check_range("proxy_score", self.proxy_score, -1.0, 1.0)
        check_range("soft_label", self.soft_label, 0.0, 1.0)
        check_range("governance_cost_initiator", self.governance_cost_initiator, 0.0)
        check_range("governance_cost_counterparty", self.governance_cost_counterparty, 0.0)
        if not self.accepted and (self.payoff_initiator != 0.0 or self.payoff_counterparty != 0.0):
            raise ConfigError("payoff_initiator", "rejected interactions realize zero payoff")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SoftInteraction":
        data = dict(data)
        data["observables"] = Observables(**data["observables"])
        return cls(**data)


@dataclass
class AgentState:
    agent_id: str
    archetype: Archetype
    reputation: float = 0.0
    stake: float = 0.0
    frozen_until_epoch: Optional[int] = None
    violation_count: int = 0
    window: int = 20
    recent_labels: deque = field(default=None)  # type: ignore[assignment]
    cumulative_payoff: float = 0.0
    frozen_previous_epoch: bool = False
    frozen_this_epoch: bool = False
    # last soft label received from each counterparty, for reciprocators
    received: dict = field(default_factory=dict)

    def __post_init__(self):
        check_count("window", self.window, 1)
        if self.recent_labels is None:
            self.recent_labels = deque(maxlen=self.window)
        check_range("stake", self.stake, 0.0)

    def is_frozen(self, epoch: int) -> bool:
        return self.frozen_until_epoch is not None and epoch < self.frozen_until_epoch

    def running_toxicity(self) -> Optional[float]:
        if not self.recent_labels:
            return None
        return sum(1.0 - p for p in self.recent_labels) / len(self.recent_labels)
