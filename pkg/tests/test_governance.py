import dataclasses
import math
from collections import Counter, defaultdict

import pytest

from softgov.core import AgentState, Archetype, ConfigError
from softgov.engine import config_from_dict, run, with_parameter
from softgov.governance import (
    GovernanceConfig,
    GovernanceOutcome,
    apply_tax,
    check_circuit_breaker,
    collusion_cost,
    freeze_agent,
    maybe_audit,
    reputation_delta,
    scan_collusion,
    window_pair_counts,
)
from softgov.scenario import load_preset


def everything_on(**gov):
    """Adversary-heavy roster that accepts anything, with every lever switched on."""
    g = dict(tax_rate=0.1, tax_split=0.7, cb_enabled=True, cb_threshold=0.9, audit_probability=0.5,
             staking_enabled=True, initial_stake=5.0, min_stake=1.0, slash_rate=0.25,
             collusion_enabled=True, collusion_z_threshold=0.5, collusion_penalty=0.3,
             decay_rate=0.9)
    g.update(gov)
    return config_from_dict({
        "scenario_name": "levers", "seed": 7, "epochs": 12, "steps_per_epoch": 15,
        "roster": "3H+3A+1O", "governance": g,
        "archetypes": {"accept_threshold": -100.0, "cautious_accept_threshold": -100.0},
    })


# ---------------------------------------------------------------- unit level

@pytest.mark.parametrize("kwargs", [dict(tax_rate=-0.1), dict(tax_split=1.5), dict(cb_threshold=0.0),
                                    dict(cb_freeze_epochs=0), dict(decay_rate=1.1),
                                    dict(audit_probability=2.0), dict(slash_rate=-0.1),
                                    dict(collusion_z_threshold=0.0), dict(cb_enabled="yes")])
def test_config_ranges(kwargs):
    with pytest.raises(ConfigError):
        GovernanceConfig(**kwargs)


def test_defaults_are_neutral():
    g = GovernanceConfig()
    assert g.tax_rate == 0.0 and not g.cb_enabled and g.decay_rate == 1.0
    assert g.audit_probability == 0.0 and not g.staking_enabled and not g.collusion_enabled
    assert (g.cb_window, g.rep_gain, g.collusion_window_epochs, g.collusion_z_threshold) == (20, 0.1, 5, 2.0)


def test_tax_uses_magnitude():
    g = GovernanceConfig(tax_rate=0.2, tax_split=0.25)
    assert apply_tax(-1.0, g) == apply_tax(1.0, g) == (0.05, pytest.approx(0.15))


def test_reputation_delta_sign():
    g = GovernanceConfig()
    assert reputation_delta(0.5, g) == 0.0
    assert reputation_delta(1.0, g) == pytest.approx(0.1)
    assert reputation_delta(0.0, g) == pytest.approx(-0.1)


def test_breaker_off_or_already_frozen_never_fires():
    a = AgentState("A1", Archetype.ADVERSARIAL)
    a.recent_labels.extend([0.0] * 5)
    assert not check_circuit_breaker(a, 0, GovernanceConfig(cb_enabled=False, cb_threshold=0.1))
    on = GovernanceConfig(cb_enabled=True, cb_threshold=0.1)
    assert check_circuit_breaker(a, 0, on)
    freeze_agent(a, 0, on)
    a.recent_labels.extend([0.0] * 5)
    assert not check_circuit_breaker(a, 1, on)


def test_breaker_threshold_is_strict():
    a = AgentState("A1", Archetype.ADVERSARIAL)
    a.recent_labels.extend([0.65, 0.65])
    assert not check_circuit_breaker(a, 0, GovernanceConfig(cb_enabled=True, cb_threshold=0.35 + 1e-12))


def test_violations_trigger_freeze_and_persist():
    g = GovernanceConfig(cb_enabled=True, cb_threshold=1.0, cb_max_violations=3)
    a = AgentState("A1", Archetype.ADVERSARIAL, violation_count=2)
    assert not check_circuit_breaker(a, 0, g)
    a.violation_count = 3
    assert check_circuit_breaker(a, 0, g)
    assert freeze_agent(a, 4, g) == 6
    assert a.violation_count == 4 and not a.recent_labels


def test_audit_draw_gating():
    g = GovernanceConfig(audit_probability=0.25)
    assert maybe_audit(0.1, 0.2499, g).audited
    assert not maybe_audit(0.1, 0.25, g).audited


def test_audit_slashes_when_staking():
    g = GovernanceConfig(audit_probability=1.0, staking_enabled=True, slash_rate=0.25)
    r = maybe_audit(0.1, 0.0, g, initiator_stake=4.0)
    assert r.violation and r.slash_amount == 1.0
    assert maybe_audit(0.1, 0.0, GovernanceConfig(audit_probability=1.0), 4.0).slash_amount == 0.0
    assert r.outcome().cost_initiator == 3.0


def test_outcomes_compose_additively():
    a = GovernanceOutcome(cost_initiator=0.1, cost_counterparty=0.2)
    b = GovernanceOutcome(cost_initiator=2.0, audited=True, violation=True, slash_amount=1.0)
    c = a + b
    assert (c.cost_initiator, c.cost_counterparty, c.slash_amount) == (2.1, 0.2, 1.0)
    assert c.audited and c.violation and not c.freeze_triggered


def test_collusion_brute_force_threshold():
    counts = {("A", "B"): 10, ("B", "C"): 1, ("C", "D"): 1, ("D", "A"): 1}
    mean = 13 / 4
    std = math.sqrt(((10 - mean) ** 2 + 3 * (1 - mean) ** 2) / 4)
    assert mean + 2 * std == pytest.approx(11.04, abs=0.01)
    assert mean + 1 * std < 10
    g = GovernanceConfig()
    assert scan_collusion(counts, g, z=2.0) == set()
    assert scan_collusion(counts, g, z=1.0) == {("A", "B")}
    assert scan_collusion({("A", "B"): 9}, g, z=0.1) == set()


def test_collusion_window_and_cost():
    hist = [Counter({("A", "B"): 2}), Counter({("A", "B"): 1, ("C", "D"): 1})]
    assert window_pair_counts(hist) == Counter({("A", "B"): 3, ("C", "D"): 1})
    g = GovernanceConfig(collusion_enabled=True, collusion_penalty=0.5)
    flagged = {frozenset(("A", "B"))}
    assert collusion_cost("B", "A", flagged, g) == (0.5, 0.5)
    assert collusion_cost("A", "C", flagged, g) == (0.0, 0.0)
    assert collusion_cost("A", "B", flagged, GovernanceConfig()) == (0.0, 0.0)


# ---------------------------------------------------------------- log level

def payoffs(log):
    return [e for e in log.events if e["kind"] == "payoff"]


def test_costs_sum_lever_by_lever():
    config = everything_on()
    result = run(config)
    g, pay = config.governance, config.payoff
    audits = {e["payload"]["interaction_id"]: e["payload"] for e in result.log.of_kind("audit")}
    flagged = defaultdict(set)
    for e in result.log.of_kind("collusion_flag"):
        flagged[e["payload"]["applies_to_epoch"]].add(frozenset(e["payload"]["pair"]))
    assert flagged, "scenario should flag at least one pair"
    assert any(a["violation"] for a in audits.values())
    hits = 0
    for e in payoffs(result.log):
        x = e["payload"]
        p = x["soft_label"]
        tax = g.tax_rate * abs(p * pay.surplus_pos - (1 - p) * pay.surplus_neg)
        colluding = frozenset((x["initiator_id"], x["counterparty_id"])) in flagged[e["epoch"]]
        col = g.collusion_penalty if colluding else 0.0
        hits += colluding
        audit = audits.get(x["interaction_id"], {"penalty": 0.0, "slash_amount": 0.0})
        want_a = g.tax_split * tax + col + audit["penalty"] + audit["slash_amount"]
        want_b = (1 - g.tax_split) * tax + col
        assert x["governance_cost_initiator"] == pytest.approx(want_a, abs=1e-12)
        assert x["governance_cost_counterparty"] == pytest.approx(want_b, abs=1e-12)
    assert hits > 0


def test_frozen_agents_do_not_interact():
    result = run(with_parameter(load_preset("strict_governance").config, "governance.cb_threshold", 0.2))
    frozen = set()
    freezes = 0
    for e in result.log.events:
        x = e["payload"]
        if e["kind"] == "freeze":
            frozen.add(x["agent_id"])
            freezes += 1
        elif e["kind"] == "unfreeze":
            frozen.discard(x["agent_id"])
        elif e["kind"] == "proposal":
            assert x["initiator_id"] not in frozen and x["counterparty_id"] not in frozen, e["seq"]
    assert freezes > 0


def test_lever_off_neutrality():
    base = load_preset("baseline").config
    result = run(with_parameter(base, "roster", "2H+2O+2D+2A"))
    pay = base.payoff
    for e in payoffs(result.log):
        x = e["payload"]
        p = x["soft_label"]
        s = p * pay.surplus_pos - (1 - p) * pay.surplus_neg
        rep = 0.1 * (2 * p - 1)
        assert x["payoff_initiator"] == pytest.approx(pay.split * s + pay.rep_weight * rep, abs=1e-12)
        assert x["payoff_counterparty"] == pytest.approx((1 - pay.split) * s + pay.rep_weight * rep, abs=1e-12)
        assert x["governance_cost_initiator"] == 0.0 == x["governance_cost_counterparty"]


def _reputation_series(config):
    log = run(config).log
    return [e["payload"]["reputations"] for e in log.of_kind("decay")], log


@pytest.mark.parametrize("rate", [1.0, 0.9])
def test_reputation_stock_follows_deltas_and_decay(rate):
    config = with_parameter(load_preset("baseline").config, "governance.decay_rate", rate)
    series, log = _reputation_series(config)
    stock = defaultdict(float)
    boundary = iter(series)
    for e in log.events:
        if e["kind"] == "payoff":
            x = e["payload"]
            stock[x["initiator_id"]] += x["rep_delta_initiator"]
            stock[x["counterparty_id"]] += x["rep_delta_counterparty"]
        elif e["kind"] == "decay":
            logged = next(boundary)
            for agent, value in logged.items():
                stock[agent] *= rate
                assert value == pytest.approx(stock[agent], abs=1e-9)


def test_decay_at_one_is_identity():
    base = load_preset("baseline").config
    a, _ = _reputation_series(base)
    b, _ = _reputation_series(with_parameter(base, "governance.decay_rate", 1.0))
    assert a == b


def test_audit_draws_nest_across_probabilities():
    base = dataclasses.replace(everything_on(), governance=GovernanceConfig())
    audited = {}
    for prob in (0.1, 0.25, 0.5):
        log = run(with_parameter(base, "governance.audit_probability", prob)).log
        audited[prob] = {e["payload"]["interaction_id"] for e in log.of_kind("audit")}
    assert audited[0.1] <= audited[0.25] <= audited[0.5]
    assert len(audited[0.1]) < len(audited[0.5])


def test_violation_counts_never_decrease_and_reach_freeze():
    config = everything_on(cb_threshold=1.0, audit_probability=1.0, staking_enabled=False,
                           collusion_enabled=False)
    log = run(config).log
    last = defaultdict(int)
    for e in log.of_kind("freeze"):
        x = e["payload"]
        assert x["violation_count"] >= last[x["agent_id"]]
        last[x["agent_id"]] = x["violation_count"]
    # the breaker threshold is 1.0, so every freeze here comes from accumulated violations
    assert log.of_kind("freeze")


def test_slashed_agents_lose_eligibility():
    config = everything_on(cb_enabled=False, audit_probability=1.0, min_stake=4.0,
                           collusion_enabled=False)
    result = run(config)
    slashed_at = {}
    for e in result.log.of_kind("audit"):
        x = e["payload"]
        if x["slash_amount"] > 0:
            slashed_at.setdefault(x["agent_id"], e["seq"])
    assert slashed_at
    for e in result.log.of_kind("proposal"):
        x = e["payload"]
        for agent in (x["initiator_id"], x["counterparty_id"]):
            assert not (agent in slashed_at and e["seq"] > slashed_at[agent]), (agent, e["seq"])
    for agent in result.agents:
        if agent.agent_id in slashed_at:
            assert agent.stake == pytest.approx(3.75)
