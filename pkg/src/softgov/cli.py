"""Command-line entry point: ``softgov {run,sweep,replay,presets}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shutil
import sys
import warnings
from pathlib import Path
from typing import Any, Optional, Sequence

from .core import ConfigError
from .engine import ReplayError, RunSummary, SimulationConfig, TruncatedLogWarning, replay, run, with_parameter
from .scenario import PRESET_NAMES, UnknownScenarioError, load_config_file, load_preset, presets_table
from .sweep import (
    BUILTIN_SWEEPS,
    DEFAULT_SEEDS,
    WEIGHT_VECTORS,
    SweepSpec,
    load_sweep_file,
    run_sweep,
    run_weight_sensitivity,
    weight_rows_csv,
    weight_rows_json,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

EPOCH_COLUMNS = ["epoch", "toxicity", "quality_gap", "conditional_loss", "spread", "welfare_delta",
                 "cumulative_welfare", "proposed_count", "accepted_count"]


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "null" if value is None else f"{value:.{digits}f}"


def summary_row(s: RunSummary) -> str:
    return (f"{s.scenario_name}  seed={s.seed}  toxicity={_fmt(s.mean_toxicity)}  "
            f"welfare={s.total_welfare:.2f}  interactions={s.total_interactions}  "
            f"pass={'yes' if s.passed else 'no'}")


def metrics_row(s: RunSummary) -> str:
    return (f"toxicity={_fmt(s.mean_toxicity)}  quality_gap={_fmt(s.quality_gap)}  "
            f"conditional_loss={_fmt(s.conditional_loss)}  spread={_fmt(s.spread)}")


def epochs_csv(s: RunSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EPOCH_COLUMNS)
    cumulative = 0.0
    for m in s.epochs:
        cumulative += m.welfare_delta
        row = m.to_dict()
        row["cumulative_welfare"] = cumulative
        writer.writerow(["" if row[c] is None else repr(row[c]) if isinstance(row[c], float)
                         else row[c] for c in EPOCH_COLUMNS])
    return buf.getvalue()


def resolve_config(target: str) -> SimulationConfig:
    if target in PRESET_NAMES:
        return load_preset(target).config
    path = Path(target)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ConfigError("", f"config file {target} not found")
        return load_config_file(path)
    raise UnknownScenarioError(target)


def _apply_overrides(config: SimulationConfig, args: argparse.Namespace) -> SimulationConfig:
    for flag, path in (("seed", "seed"), ("epochs", "epochs"), ("steps", "steps_per_epoch")):
        value = getattr(args, flag, None)
        if value is not None:
            config = with_parameter(config, path, value)
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = _apply_overrides(resolve_config(args.target), args)
    out = Path(args.out)
    created = not out.exists()
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        result = run(config)
        targets = {
            "events.jsonl": result.log.text(),
            "summary.json": json.dumps(result.summary.to_dict(), indent=2, allow_nan=False) + "\n",
            "epochs.csv": epochs_csv(result.summary),
        }
        for name, text in targets.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        if created and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        raise
    if args.format == "json":
        print(json.dumps(result.summary.to_dict(), allow_nan=False))
    else:
        print(summary_row(result.summary))
    return EXIT_OK


def _sweep_spec(args: argparse.Namespace) -> Optional[SweepSpec]:
    if args.target == "weights":
        return None
    if args.target in BUILTIN_SWEEPS:
        spec = BUILTIN_SWEEPS[args.target]
    elif Path(args.target).exists():
        spec = load_sweep_file(args.target)
    else:
        valid = ", ".join(list(BUILTIN_SWEEPS) + ["weights"])
        raise ConfigError("sweep", f"unknown sweep {args.target!r}; built-ins: {valid}")
    if args.seeds:
        spec = SweepSpec(spec.base, spec.parameter, spec.grid, tuple(args.seeds), spec.toxicity_mode)
    if args.toxicity_mode:
        spec = SweepSpec(spec.base, spec.parameter, spec.grid, spec.seeds, args.toxicity_mode)
    return spec


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = _sweep_spec(args)
    seeds = tuple(args.seeds) if args.seeds else DEFAULT_SEEDS
    if spec is None:
        rows = run_weight_sensitivity(WEIGHT_VECTORS, seeds)
        csv_text, json_text = weight_rows_csv(rows), weight_rows_json(rows)
    else:
        report = run_sweep(spec, jobs=args.jobs)
        csv_text, json_text = report.to_csv(), report.to_json()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(csv_text, encoding="utf-8")
    (out / "sweep.json").write_text(json_text, encoding="utf-8")
    sys.stdout.write(json_text if args.format == "json" else csv_text)
    return EXIT_OK


def _close(a: Any, b: Any, tol: float, path: str = "") -> Optional[str]:
    """First path at which two JSON-like values differ beyond ``tol``."""
    if isinstance(a, dict) and isinstance(b, dict):
        if a.keys() != b.keys():
            return path or "<root>"
        for k in a:
            hit = _close(a[k], b[k], tol, f"{path}.{k}" if path else k)
            if hit:
                return hit
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return path
        for i, (x, y) in enumerate(zip(a, b)):
            hit = _close(x, y, tol, f"{path}[{i}]")
            if hit:
                return hit
        return None
    if isinstance(a, bool) or isinstance(b, bool) or not isinstance(a, (int, float)) \
            or not isinstance(b, (int, float)):
        return None if a == b else path
    return None if math.isclose(a, b, rel_tol=0.0, abs_tol=tol) else path


def cmd_replay(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncatedLogWarning)
        result = replay(log_path)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    summary = result.summary
    if args.metrics_only:
        print(metrics_row(summary))
    elif args.format == "json":
        print(json.dumps(summary.to_dict(), allow_nan=False))
    else:
        print(summary_row(summary))
    if args.verify:
        reference = log_path.with_name("summary.json")
        if not reference.exists():
            print(f"error: --verify needs {reference}", file=sys.stderr)
            return EXIT_FAILED
        expected = json.loads(reference.read_text(encoding="utf-8"))
        diff = _close(summary.to_dict(), expected, 1e-9)
        if diff is not None:
            print(f"error: replayed summary differs from {reference} at {diff}", file=sys.stderr)
            return EXIT_FAILED
        print("verified: replay matches summary.json")
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    print(presets_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softgov", description="Soft-label governance simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario or config file")
    p.add_argument("target", help=f"preset name ({', '.join(PRESET_NAMES)}) or YAML config path")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="stdout format for the summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("target", help=f"built-in ({', '.join(list(BUILTIN_SWEEPS) + ['weights'])}) "
                                  "or YAML sweep file")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--out", default="out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--toxicity-mode", choices=("pooled", "epoch_mean"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="recompute a summary from an event log")
    p.add_argument("log")
    p.add_argument("--verify", action="store_true",
                   help="compare against summary.json next to the log")
    p.add_argument("--metrics-only", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("presets", help="list the built-in scenarios")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReplayError as exc:
        print(f"error: malformed log: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
