import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hdqkd.keyrate import sweep_distance  # noqa: E402
from hdqkd.scenario import reference_scenario  # noqa: E402

REFERENCE_MUS = (0.01, 0.10, 0.25)
REFERENCE_DS = (8, 32)
SWEEP_LENGTHS = tuple(float(x) for x in range(0, 251, 10))
SWEEP_PROTOCOLS = ("infinite", "two_decoy", "one_decoy", "no_decoy")

_criteria: list[tuple[str, bool, str]] = []


class ReferenceSweeps:
    """Lazily computed 0-250 km sweeps of the six reference configurations."""

    def __init__(self):
        self._rows = {}

    def __call__(self, mu, d):
        key = (mu, d)
        if key not in self._rows:
            self._rows[key] = sweep_distance(reference_scenario(mu, d), SWEEP_LENGTHS, SWEEP_PROTOCOLS)
        return self._rows[key]

    def all(self):
        return {(mu, d): self(mu, d) for mu in REFERENCE_MUS for d in REFERENCE_DS}


@pytest.fixture(scope="session")
def reference_sweeps():
    return ReferenceSweeps()


@pytest.fixture
def criterion():
    """Record a pass/fail line for the terminal summary, then assert it."""

    def record(name: str, passed: bool, detail: str):
        line = f"{name}: {'PASS' if passed else 'FAIL'} ({detail})"
        _criteria.append((name, passed, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in _criteria:
        terminalreporter.write_line(line)
