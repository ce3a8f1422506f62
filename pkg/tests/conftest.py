import time

import pytest

from softgov.engine import run, with_parameter
from softgov.scenario import PRESET_NAMES, load_preset
from softgov.sweep import BUILTIN_SWEEPS, DEFAULT_SEEDS, run_sweep, run_weight_sensitivity

# (number, verdict, description), filled in by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, text in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {text}")


@pytest.fixture(scope="session")
def preset_matrix():
    """Every preset under every default seed, plus the wall time it took."""
    start = time.perf_counter()
    results = {}
    for name in PRESET_NAMES:
        base = load_preset(name).config
        for seed in DEFAULT_SEEDS:
            results[(name, seed)] = run(with_parameter(base, "seed", seed))
    return results, time.perf_counter() - start


@pytest.fixture(scope="session")
def builtin_reports():
    return {name: run_sweep(spec) for name, spec in BUILTIN_SWEEPS.items()}


@pytest.fixture(scope="session")
def weight_rows():
    return {row.name: row for row in run_weight_sensitivity()}
