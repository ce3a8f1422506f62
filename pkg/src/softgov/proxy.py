"""Observable signals -> proxy score -> calibrated soft label."""

from __future__ import annotations

import math

from .core import DecayFactors, Observables, ProxyWeights


def rework_penalty(n_r: int, alpha_r: float = 0.3) -> float:
    return 2.0 * alpha_r ** n_r - 1.0


def verifier_penalty(n_v: int, n_m: int, alpha_v: float = 0.4, alpha_m: float = 0.5) -> float:
    """Average of the verifier-rejection and tool-misuse decays."""
    return 0.5 * ((2.0 * alpha_v ** n_v - 1.0) + (2.0 * alpha_m ** n_m - 1.0))


def proxy_score(obs: Observables, weights: ProxyWeights = ProxyWeights(),
                decays: DecayFactors = DecayFactors()) -> float:
    """Convex combination of the four signals; the misuse count is folded
    into the verifier term, so there are four weights for five observables."""
    v_hat = (
        weights.task * obs.task_progress
        + weights.rework * rework_penalty(obs.rework_count, decays.alpha_r)
        + weights.verifier * verifier_penalty(obs.verifier_rejections, obs.tool_misuse_flags,
                                              decays.alpha_v, decays.alpha_m)
        + weights.engagement * obs.engagement_delta
    )
    # rounding can push a convex combination of ones a ulp past the bound
    return max(-1.0, min(1.0, v_hat))


def calibrate(v_hat: float, k: float = 2.0) -> float:
    z = k * v_hat
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))
