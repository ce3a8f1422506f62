"""Epoch/step run loop, event logging and replay.

A run is single threaded: the order in which state is mutated defines the
log. Every random draw comes from a stream keyed by (seed, purpose, epoch,
step), so two runs of the same config write byte-identical logs.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import warnings
from collections import Counter, deque
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from . import governance as gov
from .agents import AcceptanceContext, ProposalContext, decide_acceptance, generate_observables
from .core import (
    AgentState,
    Archetype,
    ArchetypeParams,
    ConfigError,
    DecayFactors,
    PayoffConfig,
    ProxyWeights,
    SoftInteraction,
    check_count,
)
from .governance import GovernanceConfig
from .metrics import EpochMetrics, RunSummary, SuccessCriteria, epoch_metrics, summarize
from .payoff import compute_payoffs, expected_surplus
from .proxy import calibrate, proxy_score
from .rng import StepStreams

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "proposal", "acceptance", "rejection", "payoff", "audit", "freeze", "unfreeze",
    "decay", "collusion_flag", "epoch_boundary", "stall",
)

Roster = tuple[tuple[Archetype, int], ...]


def parse_roster(text: str) -> Roster:
    """``"3H+1O+1D"`` -> ((HONEST, 3), (OPPORTUNISTIC, 1), (DECEPTIVE, 1))."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("roster", f"expected a roster string like '3H+1O', got {text!r}")
    out = []
    for part in text.replace(" ", "").split("+"):
        digits = len(part) - len(part.lstrip("0123456789"))
        if digits == 0 or digits == len(part):
            raise ConfigError("roster", f"bad roster term {part!r}; expected <count><code>")
        count = int(part[:digits])
        if count < 1:
            raise ConfigError("roster", f"roster term {part!r} has a zero count")
        out.append((Archetype.from_code(part[digits:]), count))
    return tuple(out)


def format_roster(roster: Roster) -> str:
    return "+".join(f"{n}{a.value}" for a, n in roster)


@dataclass(frozen=True)
class SimulationConfig:
    scenario_name: str = "custom"
    seed: int = 42
    epochs: int = 20
    steps_per_epoch: int = 15
    roster: Roster = ((Archetype.HONEST, 2),)
    payoff: PayoffConfig = PayoffConfig()
    governance: GovernanceConfig = GovernanceConfig()
    weights: ProxyWeights = ProxyWeights()
    decays: DecayFactors = DecayFactors()
    archetypes: ArchetypeParams = ArchetypeParams()
    success: SuccessCriteria = SuccessCriteria()

    def __post_init__(self):
        check_count("seed", self.seed)
        if self.seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
        check_count("epochs", self.epochs, 1)
        check_count("steps_per_epoch", self.steps_per_epoch, 1)
        if isinstance(self.roster, str):
            object.__setattr__(self, "roster", parse_roster(self.roster))
        if sum(n for _, n in self.roster) < 2:
            raise ConfigError("roster", "needs at least two agents")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "epochs": self.epochs,
            "steps_per_epoch": self.steps_per_epoch,
            "roster": format_roster(self.roster),
        }
        for name in ("payoff", "governance", "weights", "decays", "archetypes", "success"):
            out[name] = asdict(getattr(self, name))
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_SECTIONS = {
    "payoff": PayoffConfig,
    "governance": GovernanceConfig,
    "weights": ProxyWeights,
    "decays": DecayFactors,
    "archetypes": ArchetypeParams,
    "success": SuccessCriteria,
}


def _merge(base: dict, overrides: dict, path: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(where, f"expected a mapping, got {value!r}")
            merged[key] = _merge(base[key], value, where)
        else:
            merged[key] = value
    return merged


def config_from_dict(data: dict, base: Optional[SimulationConfig] = None) -> SimulationConfig:
    """Strictly parse ``data`` layered over ``base``; errors carry field paths."""
    if not isinstance(data, dict):
        raise ConfigError("", "config root must be a mapping")
    full = _merge((base or SimulationConfig()).to_dict(), data)
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        try:
            kwargs[name] = cls(**full[name])
        except ConfigError as exc:
            raise exc.prefixed(name) from None
    return SimulationConfig(
        scenario_name=str(full["scenario_name"]),
        seed=full["seed"],
        epochs=full["epochs"],
        steps_per_epoch=full["steps_per_epoch"],
        roster=parse_roster(full["roster"]),
        **kwargs,
    )


def with_parameter(config: SimulationConfig, path: str, value: Any) -> SimulationConfig:
    """Return a copy with one dotted parameter set.

    ``payoff.rho`` is shorthand for setting ``rho_a`` and ``rho_b`` together.
    """
    if path == "payoff.rho":
        return config_from_dict({"payoff": {"rho_a": value, "rho_b": value}}, config)
    parts = path.split(".")
    override: dict = {}
    node = override
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return config_from_dict(override, config)


def resolve_parameter(config: SimulationConfig, path: str) -> Any:
    if path == "payoff.rho":
        return config.payoff.rho_a
    node: Any = config.to_dict()
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(path, "parameter path does not resolve")
        node = node[part]
    if isinstance(node, dict):
        raise ConfigError(path, "parameter path names a section, not a value")
    return node


# ---------------------------------------------------------------------------
# event log
# ---------------------------------------------------------------------------

def _jsonable(value: Any) -> Any:
    if is_dataclass(value):
        return {f.name: _jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Archetype):
        return value.value
    return value


def dumps(record: dict) -> str:
    """Compact JSON; floats use repr, the shortest exact round-trip form."""
    return json.dumps(record, separators=(",", ":"), allow_nan=False, ensure_ascii=False)


class EventLog:
    """Append-only in-memory event sequence with a header line."""

    def __init__(self, config: SimulationConfig):
        self.header = {
            "kind": "header",
            "schema_version": SCHEMA_VERSION,
            "seed": config.seed,
            "config": config.to_dict(),
        }
        self.events: list[dict] = []

    def append(self, kind: str, epoch: int, step: Optional[int], payload: dict) -> dict:
        assert kind in EVENT_KINDS, kind
        event = {"seq": len(self.events) + 1, "kind": kind, "epoch": epoch, "step": step,
                 "payload": _jsonable(payload)}
        self.events.append(event)
        return event

    def of_kind(self, *kinds: str) -> list[dict]:
        return [e for e in self.events if e["kind"] in kinds]

    def lines(self) -> list[str]:
        return [dumps(self.header)] + [dumps(e) for e in self.events]

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.text(), encoding="utf-8")


@dataclass
class RunResult:
    summary: RunSummary
    log: EventLog
    agents: list[AgentState] = field(default_factory=list)
    interactions: list[list[SoftInteraction]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------

def build_agents(config: SimulationConfig) -> list[AgentState]:
    g = config.governance
    agents = []
    for archetype, count in config.roster:
        for i in range(1, count + 1):
            agents.append(AgentState(
                agent_id=f"{archetype.value}{i}",
                archetype=archetype,
                stake=g.initial_stake if g.staking_enabled else 0.0,
                window=g.cb_window,
            ))
    return agents


def run(config: SimulationConfig) -> RunResult:
    g = config.governance
    pay = config.payoff
    # acceptance sees private surplus only; internalized harm never moves the decision
    pay_private = replace(pay, rho_a=0.0, rho_b=0.0)
    params = config.archetypes
    log = EventLog(config)
    agents = build_agents(config)
    by_epoch: list[list[SoftInteraction]] = []
    pair_history: deque = deque(maxlen=g.collusion_window_epochs)
    flagged: set[frozenset] = set()

    for epoch in range(config.epochs):
        for a in agents:
            a.frozen_this_epoch = a.is_frozen(epoch)
        epoch_items: list[SoftInteraction] = []
        pair_counts: Counter = Counter()

        for step in range(config.steps_per_epoch):
            eligible = [a for a in agents if not a.is_frozen(epoch) and gov.stake_eligible(a, g)]
            if len(eligible) < 2:
                log.append("stall", epoch, step, {"eligible": [a.agent_id for a in eligible]})
                continue
            streams = StepStreams(config.seed, epoch, step)
            init = eligible[int(streams["initiator"].integers(len(eligible)))]
            others = [a for a in eligible if a is not init]
            cp = others[int(streams["counterparty"].integers(len(others)))]

            ctx = ProposalContext(
                epoch=epoch, step=step,
                reputation=init.reputation,
                frozen_previous_epoch=init.frozen_previous_epoch,
                counterparty_id=cp.agent_id,
                counterparty_reputation=cp.reputation,
                cb_threshold=g.cb_threshold,
                weights=config.weights,
                calibration_k=pay.calibration_k,
                last_received=init.received.get(cp.agent_id),
            )
            obs = generate_observables(init.archetype, params, ctx, streams["observables"])
            v_hat = proxy_score(obs, config.weights, config.decays)
            p = calibrate(v_hat, pay.calibration_k)

            tax_a, tax_b = gov.apply_tax(expected_surplus(p, pay), g)
            col_a, col_b = gov.collusion_cost(init.agent_id, cp.agent_id, flagged, g)
            rep = gov.reputation_delta(p, g)
            pre_a, pre_b = tax_a + col_a, tax_b + col_b
            hyp = compute_payoffs(p, pay.transfer, pre_a, pre_b, rep, rep, pay)
            private = compute_payoffs(p, pay.transfer, pre_a, pre_b, rep, rep, pay_private)
            iid = f"{epoch}-{step}"
            log.append("proposal", epoch, step, {
                "interaction_id": iid,
                "initiator_id": init.agent_id,
                "counterparty_id": cp.agent_id,
                "observables": obs,
                "proxy_score": v_hat,
                "soft_label": p,
                "hypothetical_payoff_initiator": hyp.payoff_initiator,
                "hypothetical_payoff_counterparty": hyp.payoff_counterparty,
            })

            accepted = decide_acceptance(
                cp.archetype, params,
                AcceptanceContext(p, private.payoff_counterparty, init.reputation),
            )
            cp.received[init.agent_id] = p

            if not accepted:
                item = SoftInteraction(
                    interaction_id=iid, epoch=epoch, step=step,
                    initiator_id=init.agent_id, counterparty_id=cp.agent_id,
                    observables=obs, proxy_score=v_hat, soft_label=p, accepted=False,
                    transfer=pay.transfer, payoff_initiator=0.0, payoff_counterparty=0.0,
                    hypothetical_payoff_initiator=hyp.payoff_initiator,
                    hypothetical_payoff_counterparty=hyp.payoff_counterparty,
                    governance_cost_initiator=0.0, governance_cost_counterparty=0.0,
                    rep_delta_initiator=0.0, rep_delta_counterparty=0.0,
                    expected_surplus=hyp.expected_surplus, expected_harm=hyp.expected_harm,
                )
                log.append("rejection", epoch, step, item.to_dict())
                epoch_items.append(item)
                continue

            log.append("acceptance", epoch, step, {"interaction_id": iid})
            audit = gov.maybe_audit(p, float(streams["audit"].random()), g, init.stake)
            if audit.audited:
                log.append("audit", epoch, step, {
                    "interaction_id": iid, "agent_id": init.agent_id,
                    "violation": audit.violation, "penalty": audit.penalty,
                    "slash_amount": audit.slash_amount,
                })
            if audit.violation:
                init.violation_count += 1
                if g.staking_enabled:
                    init.stake = gov.slash(init.stake, g)

            cost_a = pre_a + audit.penalty + audit.slash_amount
            cost_b = pre_b
            real = compute_payoffs(p, pay.transfer, cost_a, cost_b, rep, rep, pay,
                                   tax_paid=tax_a + tax_b, audit_penalty=audit.penalty,
                                   slash_amount=audit.slash_amount)
            init.reputation += rep
            cp.reputation += rep
            init.cumulative_payoff += real.payoff_initiator
            cp.cumulative_payoff += real.payoff_counterparty
            init.recent_labels.append(p)
            cp.recent_labels.append(p)
            pair_counts[(init.agent_id, cp.agent_id)] += 1

            item = SoftInteraction(
                interaction_id=iid, epoch=epoch, step=step,
                initiator_id=init.agent_id, counterparty_id=cp.agent_id,
                observables=obs, proxy_score=v_hat, soft_label=p, accepted=True,
                transfer=pay.transfer,
                payoff_initiator=real.payoff_initiator,
                payoff_counterparty=real.payoff_counterparty,
                hypothetical_payoff_initiator=hyp.payoff_initiator,
                hypothetical_payoff_counterparty=hyp.payoff_counterparty,
                governance_cost_initiator=cost_a, governance_cost_counterparty=cost_b,
                rep_delta_initiator=rep, rep_delta_counterparty=rep,
                expected_surplus=real.expected_surplus, expected_harm=real.expected_harm,
                audited=audit.audited, audit_violation=audit.violation,
            )
            log.append("payoff", epoch, step, item.to_dict())
            epoch_items.append(item)

            for party in (init, cp):
                if gov.check_circuit_breaker(party, epoch, g):
                    running = party.running_toxicity()
                    until = gov.freeze_agent(party, epoch, g)
                    log.append("freeze", epoch, step, {
                        "agent_id": party.agent_id, "frozen_until_epoch": until,
                        "violation_count": party.violation_count, "running_toxicity": running,
                    })

        # epoch boundary
        by_epoch.append(epoch_items)
        gov.decay_reputations(agents, g)
        log.append("decay", epoch, None, {
            "decay_rate": g.decay_rate,
            "reputations": {a.agent_id: a.reputation for a in agents},
        })
        if g.collusion_enabled:
            pair_history.append(pair_counts)
            hits = gov.scan_collusion(gov.window_pair_counts(pair_history), g)
            flagged = {frozenset(pair) for pair in hits}
            for i, j in sorted(hits):
                log.append("collusion_flag", epoch, None, {
                    "pair": [i, j], "penalty": g.collusion_penalty,
                    "applies_to_epoch": epoch + 1,
                })
        for a in agents:
            a.frozen_previous_epoch = a.frozen_this_epoch
            if a.frozen_until_epoch is not None and not a.is_frozen(epoch + 1):
                a.frozen_until_epoch = None
                log.append("unfreeze", epoch, None, {"agent_id": a.agent_id})
        metrics = epoch_metrics(epoch, epoch_items, pay)
        log.append("epoch_boundary", epoch, None, metrics.to_dict())

    summary = summarize(config.scenario_name, config.seed, by_epoch, pay, config.success)
    return RunResult(summary, log, agents, by_epoch)


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

class ReplayError(ValueError):
    def __init__(self, line: int, field_name: str, message: str):
        self.line = line
        self.field = field_name
        super().__init__(f"line {line}: field {field_name!r}: {message}")


class TruncatedLogWarning(UserWarning):
    pass


@dataclass
class ReplayResult:
    summary: RunSummary
    config: SimulationConfig
    truncated: bool
    interactions: list[list[SoftInteraction]]


_REQUIRED_EVENT_FIELDS = ("seq", "kind", "epoch", "step", "payload")


def replay_lines(lines: Sequence[str], complete_last_line: bool = True,
                 check_derived: bool = True) -> ReplayResult:
    """Recompute a run summary from log lines alone.

    With ``check_derived`` every logged proxy score, soft label, payoff and
    epoch metric is re-derived from its inputs and must match; turn it off to
    summarize hand-written logs whose labels are not tied to observables.

    A final line that fails to parse and was not newline-terminated is read
    as truncation: the run is summarized up to the last complete event and a
    :class:`TruncatedLogWarning` is issued. Every other defect raises
    :class:`ReplayError` naming the 1-based line number and the field.
    """
    if not lines:
        raise ReplayError(1, "header", "empty log")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ReplayError(1, "header", f"invalid JSON ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("kind") != "header":
        raise ReplayError(1, "kind", "first line must be the header")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ReplayError(1, "schema_version", f"unsupported {header.get('schema_version')!r}")
    try:
        config = config_from_dict(header["config"])
    except ConfigError as exc:
        raise ReplayError(1, f"config.{exc.path}", exc.message) from None
    except KeyError:
        raise ReplayError(1, "config", "missing") from None

    truncated = False
    by_epoch: list[list[SoftInteraction]] = []
    boundaries = 0
    expected_seq = 1
    for idx, raw in enumerate(lines[1:], start=2):
        is_last = idx == len(lines)
        if not raw.strip():
            raise ReplayError(idx, "line", "blank line")
        try:
            event = json.loads(raw)
        except json.JSONDecodeError as exc:
            if is_last and not complete_last_line:
                truncated = True
                break
            raise ReplayError(idx, _guess_field(raw, exc.pos), f"invalid JSON ({exc.msg})") from None
        if not isinstance(event, dict):
            raise ReplayError(idx, "event", "not a JSON object")
        for name in _REQUIRED_EVENT_FIELDS:
            if name not in event:
                raise ReplayError(idx, name, "missing")
        if event["seq"] != expected_seq:
            raise ReplayError(idx, "seq", f"expected {expected_seq}, got {event['seq']!r}")
        expected_seq += 1
        kind = event["kind"]
        if kind not in EVENT_KINDS:
            raise ReplayError(idx, "kind", f"unknown event kind {kind!r}")
        epoch = event["epoch"]
        if isinstance(epoch, bool) or not isinstance(epoch, int) or epoch < 0:
            raise ReplayError(idx, "epoch", f"bad epoch {epoch!r}")
        while len(by_epoch) <= epoch:
            by_epoch.append([])
        if kind in ("payoff", "rejection"):
            try:
                item = SoftInteraction.from_dict(event["payload"])
            except ConfigError as exc:
                raise ReplayError(idx, f"payload.{exc.path}", exc.message) from None
            except TypeError as exc:
                raise ReplayError(idx, "payload", str(exc)) from None
            if item.accepted != (kind == "payoff"):
                raise ReplayError(idx, "payload.accepted", f"inconsistent with {kind!r} event")
            if check_derived:
                _check_interaction(idx, item, config)
            by_epoch[epoch].append(item)
        elif kind == "epoch_boundary":
            boundaries += 1
            if check_derived:
                    _check_epoch_metrics(idx, event["payload"],
                                     epoch_metrics(epoch, by_epoch[epoch], config.payoff))

    if boundaries < config.epochs:
        truncated = True
    if truncated:
        warnings.warn(f"event log is truncated: {boundaries} of {config.epochs} epochs complete",
                      TruncatedLogWarning, stacklevel=2)
    summary = summarize(config.scenario_name, config.seed, by_epoch, config.payoff, config.success)
    return ReplayResult(summary, config, truncated, by_epoch)


def _check_interaction(idx: int, item: SoftInteraction, config: SimulationConfig) -> None:
    """Re-derive every dependent number of a logged interaction from its inputs.

    Recomputation repeats the run loop's arithmetic exactly, so any
    difference at all means the line was edited.
    """
    pay = config.payoff
    v_hat = proxy_score(item.observables, config.weights, config.decays)
    checks = [("proxy_score", item.proxy_score, v_hat),
              ("soft_label", item.soft_label, calibrate(item.proxy_score, pay.calibration_k))]
    if item.accepted:
        rep = gov.reputation_delta(item.soft_label, config.governance)
        real = compute_payoffs(item.soft_label, item.transfer, item.governance_cost_initiator,
                               item.governance_cost_counterparty, item.rep_delta_initiator,
                               item.rep_delta_counterparty, pay)
        checks += [("rep_delta_initiator", item.rep_delta_initiator, rep),
                   ("rep_delta_counterparty", item.rep_delta_counterparty, rep),
                   ("expected_surplus", item.expected_surplus, real.expected_surplus),
                   ("expected_harm", item.expected_harm, real.expected_harm),
                   ("payoff_initiator", item.payoff_initiator, real.payoff_initiator),
                   ("payoff_counterparty", item.payoff_counterparty, real.payoff_counterparty)]
    for name, logged, derived in checks:
        if logged != derived:
            raise ReplayError(idx, f"payload.{name}",
                              f"logged {logged!r} but inputs give {derived!r}")


def _check_epoch_metrics(idx: int, logged: Any, derived: EpochMetrics) -> None:
    if not isinstance(logged, dict):
        raise ReplayError(idx, "payload", "expected epoch metrics")
    for name, value in derived.to_dict().items():
        if name not in logged:
            raise ReplayError(idx, f"payload.{name}", "missing")
        got = logged[name]
        if value is None or got is None or isinstance(value, int):
            ok = got == value
        else:
            ok = isinstance(got, (int, float)) and math.isclose(got, value, rel_tol=0.0,
                                                                abs_tol=1e-9)
        if not ok:
            raise ReplayError(idx, f"payload.{name}", f"logged {got!r} but events give {value!r}")


def _guess_field(raw: str, pos: int) -> str:
    """Name of the JSON key nearest before a parse error position."""
    head = raw[:pos]
    end = head.rfind('":')
    if end == -1:
        return "line"
    start = head.rfind('"', 0, end)
    return head[start + 1:end] if start != -1 else "line"


def replay(source: Union[str, Path, Iterable[str], EventLog],
           check_derived: bool = True) -> ReplayResult:
    if isinstance(source, EventLog):
        return replay_lines(source.lines(), check_derived=check_derived)
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        lines = text.split("\n")
        complete = text.endswith("\n")
        if complete:
            lines = lines[:-1]
        return replay_lines(lines, complete_last_line=complete, check_derived=check_derived)
    return replay_lines(list(source), check_derived=check_derived)
