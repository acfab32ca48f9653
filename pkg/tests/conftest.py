from pathlib import Path

import pytest

from pwla_mas.zones import export_scenario, generate_zones


def write_csv(path, header, rows, comments=()):
    lines = [f"# {c}" for c in comments] + [",".join(header)]
    lines += [",".join(str(c) for c in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def scenario_path(tmp_path):
    path = tmp_path / "zones.csv"
    export_scenario(generate_zones(40, 4, seed=1), path, seed=1)
    return path


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in rep.nodeid and rep.when == "call":
                lines.append((rep.nodeid.split("::")[-1], outcome.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{outcome:<7} {name}")
