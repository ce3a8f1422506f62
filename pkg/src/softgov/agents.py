"""Archetype behaviour: what an initiator emits and when a counterparty accepts.

Generators saturate out-of-range draws instead of resampling, so each
archetype consumes a fixed number of draws per proposal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Archetype, ArchetypeParams, Observables, ProxyWeights, clamp
from .proxy import logit

CAUTIOUS_KINDS = (Archetype.CAUTIOUS, Archetype.CAUTIOUS_RECIPROCATOR)


@dataclass(frozen=True)
class ProposalContext:
    """What an initiator can see when it builds a proposal.

    Only its own state plus the counterparty's public reputation; no private
    counterparty state.
    """

    epoch: int
    step: int
    reputation: float
    frozen_previous_epoch: bool
    counterparty_id: str
    counterparty_reputation: float
    cb_threshold: float
    weights: ProxyWeights = ProxyWeights()
    calibration_k: float = 2.0
    # soft label of the counterparty's most recent proposal to this agent
    last_received: Optional[float] = None


@dataclass(frozen=True)
class AcceptanceContext:
    soft_label: float
    payoff: float
    initiator_reputation: float


def _leak(rng: np.random.Generator, prob: float) -> int:
    return 1 if rng.random() < prob else 0


def _honest(params: ArchetypeParams, rng: np.random.Generator, cautious: bool = False) -> Observables:
    if cautious:
        task = rng.normal(params.cautious_task_mean, params.cautious_task_sd)
    else:
        task = rng.normal(params.honest_task_mean, params.honest_task_sd)
    n_r = _leak(rng, params.leak_prob)
    n_v = _leak(rng, params.leak_prob)
    n_m = _leak(rng, params.leak_prob)
    engage = rng.normal(params.honest_engage_mean, params.honest_engage_sd)
    return Observables.saturating(task, n_r, n_v, n_m, engage)


def _opportunistic(params: ArchetypeParams, rng: np.random.Generator) -> Observables:
    task = rng.normal(params.opportunist_task_mean, params.opportunist_task_sd)
    n_r = rng.poisson(params.opportunist_rework_rate)
    n_v = _leak(rng, params.leak_prob)
    n_m = _leak(rng, params.leak_prob)
    engage = rng.normal(params.opportunist_engage_mean, params.opportunist_engage_sd)
    return Observables.saturating(task, n_r, n_v, n_m, engage)


def _deceptive(params: ArchetypeParams, rng: np.random.Generator) -> Observables:
    task = rng.normal(params.deceptive_task_mean, params.deceptive_task_sd)
    n_v = _leak(rng, params.leak_prob)
    n_m = _leak(rng, params.leak_prob)
    engage = rng.normal(params.deceptive_engage_mean, params.deceptive_engage_sd)
    return Observables.saturating(task, 0, n_v, n_m, engage)


def _adversarial(params: ArchetypeParams, rng: np.random.Generator) -> Observables:
    task = rng.normal(params.adversarial_task_mean, params.adversarial_task_sd)
    n_r = rng.poisson(params.adversarial_rework_rate)
    n_v = rng.poisson(params.adversarial_verifier_rate)
    n_m = rng.poisson(params.adversarial_misuse_rate)
    engage = rng.normal(params.adversarial_engage_mean, params.adversarial_engage_sd)
    return Observables.saturating(task, n_r, n_v, n_m, engage)


def dancer_target_score(cb_threshold: float, params: ArchetypeParams, k: float) -> float:
    """Proxy score whose calibrated label sits at threshold + epsilon."""
    p_target = min(max(cb_threshold + params.dancer_epsilon, 1e-9), 1.0 - 1e-9)
    return logit(p_target) / k


def _dancer(params: ArchetypeParams, ctx: ProposalContext, rng: np.random.Generator) -> Observables:
    w = ctx.weights
    target = dancer_target_score(ctx.cb_threshold, params, ctx.calibration_k)
    target += rng.normal(0.0, params.dancer_noise_sd)
    # zero counts and full engagement put the three non-task signals at +1
    if w.task > 0:
        task = (target - (w.rework + w.verifier + w.engagement)) / w.task
    else:
        task = 0.0
    return Observables.saturating(clamp(task), 0, 0, 0, 1.0)


def generate_observables(archetype: Archetype, params: ArchetypeParams, ctx: ProposalContext,
                         rng: np.random.Generator) -> Observables:
    if archetype is Archetype.HONEST:
        return _honest(params, rng)
    if archetype is Archetype.OPPORTUNISTIC:
        return _opportunistic(params, rng)
    if archetype is Archetype.DECEPTIVE:
        return _deceptive(params, rng)
    if archetype is Archetype.ADVERSARIAL:
        return _adversarial(params, rng)
    if archetype is Archetype.ADAPTIVE_ADVERSARIAL:
        if ctx.frozen_previous_epoch:
            return _honest(params, rng)
        return _adversarial(params, rng)
    if archetype is Archetype.CAUTIOUS:
        return _honest(params, rng, cautious=True)
    if archetype is Archetype.CAUTIOUS_RECIPROCATOR:
        if ctx.last_received is not None and ctx.last_received < params.reciprocator_defect_below:
            return _adversarial(params, rng)
        return _honest(params, rng, cautious=True)
    if archetype is Archetype.THRESHOLD_DANCER:
        return _dancer(params, ctx, rng)
    raise ValueError(f"no generator for archetype {archetype!r}")


def acceptance_threshold(archetype: Archetype, params: ArchetypeParams) -> float:
    if archetype in CAUTIOUS_KINDS:
        return params.cautious_accept_threshold
    return params.accept_threshold


def decide_acceptance(archetype: Archetype, params: ArchetypeParams, ctx: AcceptanceContext,
                      rng: Optional[np.random.Generator] = None) -> bool:
    """Accept iff the counterparty's expected payoff clears its threshold.

    Cautious kinds also refuse initiators whose public reputation is below
    ``cautious_min_reputation``. The built-in rules are deterministic; ``rng``
    is the step's acceptance stream, available to custom rules.
    """
    if ctx.payoff < acceptance_threshold(archetype, params):
        return False
    if archetype in CAUTIOUS_KINDS and ctx.initiator_reputation < params.cautious_min_reputation:
        return False
    return True
