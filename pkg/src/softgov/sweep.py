"""Grid sweeps over one config parameter with paired seeds.

Every grid point reuses the same seed list, so per-seed comparisons across
the grid are paired. Cells are independent runs and may execute in worker
processes; results are always collected in (grid value, seed) order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import yaml

from .core import Archetype, ConfigError, ProxyWeights
from .engine import SimulationConfig, parse_roster, resolve_parameter, run, with_parameter
from .metrics import TOXICITY_MODES, aggregate_seeds
from .scenario import load_preset

DEFAULT_SEEDS = (42, 123, 456, 789, 1024)

CSV_COLUMNS = ["grid_value", "toxicity_mean", "toxicity_std", "welfare_mean", "welfare_std",
               "interactions_mean"]


@dataclass(frozen=True)
class SweepSpec:
    base: str
    parameter: str
    grid: tuple
    seeds: tuple = DEFAULT_SEEDS
    toxicity_mode: str = "pooled"

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.grid:
            raise ConfigError("grid", "must not be empty")
        if not self.seeds:
            raise ConfigError("seeds", "must not be empty")
        if self.toxicity_mode not in TOXICITY_MODES:
            raise ConfigError("toxicity_mode", f"expected one of {TOXICITY_MODES}")


BUILTIN_SWEEPS = {
    "rho": SweepSpec("misalignment_sweep", "payoff.rho", (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)),
    "tax": SweepSpec("strict_governance", "governance.tax_rate", (0.0, 0.05, 0.10, 0.15, 0.20, 0.30)),
    "circuit_breaker": SweepSpec("strict_governance", "governance.cb_threshold",
                                 (0.20, 0.35, 0.50, 0.65, 0.80)),
    "audit": SweepSpec("strict_governance", "governance.audit_probability",
                       (0.0, 0.05, 0.10, 0.25, 0.50)),
    "decay": SweepSpec("strict_governance", "governance.decay_rate", (0.70, 0.80, 0.90, 0.95, 1.0)),
}

WEIGHT_VECTORS = {
    "uniform": (0.25, 0.25, 0.25, 0.25),
    "default": (0.40, 0.20, 0.20, 0.20),
    "heavy_task": (0.80, 0.05, 0.05, 0.10),
}


@dataclass
class CellResult:
    grid_value: Any
    seed: int
    toxicity: Optional[float]
    welfare: float
    interactions: int
    passed: bool
    config_digest: str


@dataclass
class SweepRow:
    grid_value: Any
    toxicity_mean: Optional[float]
    toxicity_std: Optional[float]
    welfare_mean: float
    welfare_std: float
    interactions_mean: float


@dataclass
class SweepReport:
    spec: SweepSpec
    rows: list[SweepRow]
    cells: list[CellResult] = field(default_factory=list)

    def cells_for(self, grid_value: Any) -> list[CellResult]:
        return [c for c in self.cells if c.grid_value == grid_value]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([_csv_value(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        data = {
            "spec": asdict(self.spec),
            "rows": [asdict(r) for r in self.rows],
            "cells": [asdict(c) for c in self.cells],
        }
        return json.dumps(data, indent=2, allow_nan=False) + "\n"


def _csv_value(value: Any) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)


def _run_cell(config: SimulationConfig) -> tuple:
    s = run(config).summary
    return s.mean_toxicity, s.epoch_mean_toxicity, s.total_welfare, s.total_interactions, s.passed


def _map(configs: Sequence[SimulationConfig], jobs: int) -> list[tuple]:
    if jobs <= 1 or len(configs) <= 1:
        return [_run_cell(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, configs))


def cell_config(spec: SweepSpec, grid_value: Any, seed: int,
                base: Optional[SimulationConfig] = None) -> SimulationConfig:
    base = base or load_preset(spec.base).config
    return with_parameter(with_parameter(base, spec.parameter, grid_value), "seed", seed)


def run_sweep(spec: SweepSpec, jobs: int = 1, base: Optional[SimulationConfig] = None) -> SweepReport:
    base = base or load_preset(spec.base).config
    resolve_parameter(base, spec.parameter)
    grid = sorted(spec.grid)
    # build every config first so a bad grid value fails before any run
    configs = [cell_config(spec, v, s, base) for v in grid for s in spec.seeds]
    results = _map(configs, jobs)

    cells = []
    for cfg, (pooled, epoch_mean, welfare, n, passed) in zip(configs, results):
        tox = pooled if spec.toxicity_mode == "pooled" else epoch_mean
        value = resolve_parameter(cfg, spec.parameter)
        cells.append(CellResult(value, cfg.seed, tox, welfare, n, passed, cfg.digest()))

    rows = []
    per = len(spec.seeds)
    for i, value in enumerate(grid):
        chunk = cells[i * per:(i + 1) * per]
        tox_values = [c.toxicity for c in chunk if c.toxicity is not None]
        tox_mean, tox_std = aggregate_seeds(tox_values) if tox_values else (None, None)
        w_mean, w_std = aggregate_seeds([c.welfare for c in chunk])
        n_mean, _ = aggregate_seeds([float(c.interactions) for c in chunk])
        rows.append(SweepRow(chunk[0].grid_value, tox_mean, tox_std, w_mean, w_std, n_mean))
    return SweepReport(spec, rows, cells)


def load_sweep_file(path: Union[str, Path]) -> SweepSpec:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ConfigError("", "sweep file must contain a mapping")
    allowed = {"base", "parameter", "grid", "seeds", "toxicity_mode"}
    for key in data:
        if key not in allowed:
            raise ConfigError(str(key), "unknown key")
    for key in ("base", "parameter", "grid"):
        if key not in data:
            raise ConfigError(key, "missing")
    return SweepSpec(**data)


# ---------------------------------------------------------------------------
# proxy-weight sensitivity
# ---------------------------------------------------------------------------

@dataclass
class WeightRow:
    name: str
    weights: tuple
    honest_mean: float
    honest_std: float
    adversarial_mean: float
    adversarial_std: float

    @property
    def gap(self) -> float:
        return self.honest_mean - self.adversarial_mean


def _label_means(config: SimulationConfig) -> tuple[float, float]:
    result = run(config)
    kinds = {a.agent_id: a.archetype for a in result.agents}
    honest, adversarial = [], []
    for items in result.interactions:
        for it in items:
            kind = kinds[it.initiator_id]
            if kind is Archetype.HONEST:
                honest.append(it.soft_label)
            elif kind is Archetype.ADVERSARIAL:
                adversarial.append(it.soft_label)
    return math.fsum(honest) / len(honest), math.fsum(adversarial) / len(adversarial)


def weight_sensitivity_config(weights: Sequence[float], seed: int, roster: str = "5H+5A",
                              epochs: int = 20, steps: int = 15) -> SimulationConfig:
    return SimulationConfig(scenario_name="weight_sensitivity", seed=seed, epochs=epochs,
                            steps_per_epoch=steps, roster=parse_roster(roster),
                            weights=ProxyWeights.from_sequence(weights))


def run_weight_sensitivity(vectors: Optional[dict] = None, seeds: Sequence[int] = DEFAULT_SEEDS,
                           roster: str = "5H+5A") -> list[WeightRow]:
    """Mean soft label of honest and adversarial proposals under each weight vector.

    Runs an ungoverned fixed roster; every proposal counts, accepted or not.
    """
    vectors = WEIGHT_VECTORS if vectors is None else vectors
    rows = []
    for name, weights in vectors.items():
        try:
            ProxyWeights.from_sequence(weights)
        except ConfigError as exc:
            raise exc.prefixed(f"weights.{name}") from None
        means = [_label_means(weight_sensitivity_config(weights, s, roster)) for s in seeds]
        h_mean, h_std = aggregate_seeds([m[0] for m in means])
        a_mean, a_std = aggregate_seeds([m[1] for m in means])
        rows.append(WeightRow(name, tuple(weights), h_mean, h_std, a_mean, a_std))
    return rows


def weight_rows_csv(rows: Sequence[WeightRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["vector", "weights", "honest_mean", "honest_std", "adversarial_mean",
                     "adversarial_std", "gap"])
    for r in rows:
        writer.writerow([r.name, " ".join(repr(w) for w in r.weights), repr(r.honest_mean),
                         repr(r.honest_std), repr(r.adversarial_mean), repr(r.adversarial_std),
                         repr(r.gap)])
    return buf.getvalue()


def weight_rows_json(rows: Sequence[WeightRow]) -> str:
    data = [dict(asdict(r), gap=r.gap) for r in rows]
    return json.dumps(data, indent=2, allow_nan=False) + "\n"
