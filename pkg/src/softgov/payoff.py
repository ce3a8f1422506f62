"""Expected surplus, expected harm, and the two agents' payoffs.

Governance costs arrive pre-summed; this module never looks at lever state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import PayoffConfig


@dataclass(frozen=True)
class PayoffBreakdown:
    expected_surplus: float
    expected_harm: float
    payoff_initiator: float
    payoff_counterparty: float
    tax_paid: float = 0.0
    audit_penalty: float = 0.0
    slash_amount: float = 0.0


def expected_surplus(p: float, cfg: PayoffConfig) -> float:
    return p * cfg.surplus_pos - (1.0 - p) * cfg.surplus_neg


def expected_harm(p: float, cfg: PayoffConfig) -> float:
    return (1.0 - p) * cfg.harm


def compute_payoffs(p: float, transfer: float, costs_a: float, costs_b: float,
                    rep_a: float, rep_b: float, cfg: PayoffConfig, *,
                    tax_paid: float = 0.0, audit_penalty: float = 0.0,
                    slash_amount: float = 0.0) -> PayoffBreakdown:
    """Initiator and counterparty payoffs for one interaction.

    ``rep_a``/``rep_b`` are this interaction's reputation changes, not the
    agents' reputation stocks. The keyword-only amounts are carried through
    for reporting and are assumed to already be inside ``costs_a``/``costs_b``.
    """
    s = expected_surplus(p, cfg)
    e = expected_harm(p, cfg)
    pi_a = cfg.split * s - transfer - costs_a - cfg.rho_a * e + cfg.rep_weight * rep_a
    pi_b = (1.0 - cfg.split) * s + transfer - costs_b - cfg.rho_b * e + cfg.rep_weight * rep_b
    return PayoffBreakdown(s, e, pi_a, pi_b, tax_paid, audit_penalty, slash_amount)
