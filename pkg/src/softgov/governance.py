"""Governance levers.

Each lever is a small pure function over agent state, config and (for the
audit) one RNG draw. Costs from different levers simply add. The engine
owns every mutation of :class:`~softgov.core.AgentState`; the helpers here
that mutate (``freeze_agent``, ``decay_reputations``) are only called from
the run loop.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Optional

from .core import AgentState, ConfigError, check_count, check_range

Pair = tuple[str, str]


@dataclass(frozen=True)
class GovernanceConfig:
    tax_rate: float = 0.0
    tax_split: float = 0.5

    cb_enabled: bool = False
    cb_threshold: float = 1.0
    cb_freeze_epochs: int = 2
    cb_max_violations: int = 3
    cb_window: int = 20

    decay_rate: float = 1.0
    rep_gain: float = 0.1

    audit_probability: float = 0.0
    audit_multiplier: float = 2.0
    audit_base_penalty: float = 1.0
    audit_violation_threshold: float = 0.3

    staking_enabled: bool = False
    initial_stake: float = 5.0
    min_stake: float = 1.0
    slash_rate: float = 0.25

    collusion_enabled: bool = False
    collusion_window_epochs: int = 5
    collusion_z_threshold: float = 2.0
    collusion_penalty: float = 0.5

    def __post_init__(self):
        for name in ("cb_enabled", "staking_enabled", "collusion_enabled"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(name, f"expected true/false, got {getattr(self, name)!r}")
        ranges = {
            "tax_rate": (0.0, math.inf),
            "tax_split": (0.0, 1.0),
            "decay_rate": (0.0, 1.0),
            "rep_gain": (0.0, math.inf),
            "audit_probability": (0.0, 1.0),
            "audit_multiplier": (0.0, math.inf),
            "audit_base_penalty": (0.0, math.inf),
            "audit_violation_threshold": (0.0, 1.0),
            "initial_stake": (0.0, math.inf),
            "min_stake": (0.0, math.inf),
            "slash_rate": (0.0, 1.0),
            "collusion_penalty": (0.0, math.inf),
        }
        for name, (lo, hi) in ranges.items():
            object.__setattr__(self, name, check_range(name, getattr(self, name), lo, hi))
        object.__setattr__(self, "cb_threshold",
                           check_range("cb_threshold", self.cb_threshold, 0.0, 1.0, lo_open=True))
        object.__setattr__(self, "collusion_z_threshold",
                           check_range("collusion_z_threshold", self.collusion_z_threshold,
                                       0.0, lo_open=True))
        for name in ("cb_freeze_epochs", "cb_max_violations", "cb_window", "collusion_window_epochs"):
            check_count(name, getattr(self, name), 1)


@dataclass(frozen=True)
class GovernanceOutcome:
    cost_initiator: float = 0.0
    cost_counterparty: float = 0.0
    audited: bool = False
    violation: bool = False
    slash_amount: float = 0.0
    freeze_triggered: bool = False

    def __add__(self, other: "GovernanceOutcome") -> "GovernanceOutcome":
        return GovernanceOutcome(
            self.cost_initiator + other.cost_initiator,
            self.cost_counterparty + other.cost_counterparty,
            self.audited or other.audited,
            self.violation or other.violation,
            self.slash_amount + other.slash_amount,
            self.freeze_triggered or other.freeze_triggered,
        )


def apply_tax(base: float, cfg: GovernanceConfig) -> tuple[float, float]:
    """Ad valorem levy on ``|base|``, split between initiator and counterparty."""
    total = cfg.tax_rate * abs(base)
    return cfg.tax_split * total, (1.0 - cfg.tax_split) * total


def reputation_delta(p: float, cfg: GovernanceConfig) -> float:
    return cfg.rep_gain * (2.0 * p - 1.0)


def check_circuit_breaker(agent: AgentState, current_epoch: int, cfg: GovernanceConfig) -> bool:
    """True if the agent should be frozen now. Never fires on an empty window."""
    if not cfg.cb_enabled or agent.is_frozen(current_epoch):
        return False
    if agent.violation_count >= cfg.cb_max_violations:
        return True
    running = agent.running_toxicity()
    return running is not None and running > cfg.cb_threshold


def freeze_agent(agent: AgentState, current_epoch: int, cfg: GovernanceConfig) -> int:
    agent.frozen_until_epoch = current_epoch + cfg.cb_freeze_epochs
    agent.violation_count += 1
    agent.frozen_this_epoch = True
    agent.recent_labels.clear()
    return agent.frozen_until_epoch


def decay_reputations(agents: Iterable[AgentState], cfg: GovernanceConfig) -> None:
    for agent in agents:
        agent.reputation = cfg.decay_rate * agent.reputation


@dataclass(frozen=True)
class AuditResult:
    audited: bool
    violation: bool
    penalty: float
    slash_amount: float

    def outcome(self) -> GovernanceOutcome:
        return GovernanceOutcome(cost_initiator=self.penalty + self.slash_amount,
                                 audited=self.audited, violation=self.violation,
                                 slash_amount=self.slash_amount)


def maybe_audit(soft_label: float, draw: float, cfg: GovernanceConfig,
                initiator_stake: float = 0.0) -> AuditResult:
    """Audit decision from one uniform draw in [0, 1).

    The caller consumes the draw for every accepted interaction whether or
    not auditing is switched on, so sweeping ``audit_probability`` audits
    nested sets of interactions under a fixed seed.
    """
    if not draw < cfg.audit_probability:
        return AuditResult(False, False, 0.0, 0.0)
    if soft_label >= cfg.audit_violation_threshold:
        return AuditResult(True, False, 0.0, 0.0)
    penalty = cfg.audit_base_penalty * cfg.audit_multiplier
    slash = cfg.slash_rate * initiator_stake if cfg.staking_enabled else 0.0
    return AuditResult(True, True, penalty, slash)


def stake_eligible(agent: AgentState, cfg: GovernanceConfig) -> bool:
    return not cfg.staking_enabled or agent.stake >= cfg.min_stake


def slash(stake: float, cfg: GovernanceConfig) -> float:
    return stake * (1.0 - cfg.slash_rate)


def scan_collusion(pair_counts: Mapping[Pair, int], cfg: GovernanceConfig,
                   z: Optional[float] = None) -> set[Pair]:
    """Ordered pairs whose count exceeds mean + z * (population std).

    Statistics run over pairs that interacted at least once in the window.
    """
    z = cfg.collusion_z_threshold if z is None else z
    active = {pair: n for pair, n in pair_counts.items() if n > 0}
    if len(active) < 2:
        return set()
    counts = list(active.values())
    mean = math.fsum(counts) / len(counts)
    std = math.sqrt(math.fsum((c - mean) ** 2 for c in counts) / len(counts))
    cutoff = mean + z * std
    return {pair for pair, n in active.items() if n > cutoff}


def window_pair_counts(history: Iterable[Counter]) -> Counter:
    total: Counter = Counter()
    for epoch_counts in history:
        total.update(epoch_counts)
    return total


def collusion_cost(initiator: str, counterparty: str, flagged: Collection[frozenset],
                   cfg: GovernanceConfig) -> tuple[float, float]:
    """Surcharge on both members when a flagged pair interacts again."""
    if not cfg.collusion_enabled or frozenset((initiator, counterparty)) not in flagged:
        return 0.0, 0.0
    return cfg.collusion_penalty, cfg.collusion_penalty
