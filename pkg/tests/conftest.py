from __future__ import annotations

from pathlib import Path

import pytest

from hopdr.automata import parse_automaton
from hopdr.systems import parse_system

FIXTURES = Path(__file__).parent / "fixtures"

# Filled by test_acceptance.py, echoed in the terminal summary so the lines
# are visible even when pytest captures output.
ACCEPTANCE_LINES: list[str] = []


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_system(name: str):
    return parse_system((FIXTURES / name).read_text(encoding="utf-8"))


def load_automaton(name: str):
    return parse_automaton((FIXTURES / name).read_text(encoding="utf-8"))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
