from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from wallcoherence.presets import all_presets, reference_values

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def presets():
    return all_presets()


@pytest.fixture(scope="session")
def geometric_presets():
    return all_presets(tabulated_corrections=False)


@pytest.fixture()
def reference():
    return reference_values()


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture()
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion and return the failures list."""
    lines = request.config.stash[VERDICTS]

    def record(number: int, title: str, failures: list[str], detail: str = "") -> None:
        state = "PASS" if not failures else "FAIL"
        line = f"criterion {number:2d} {state}: {title}"
        if detail:
            line += f" [{detail}]"
        for f in failures:
            line += f"\n    - {f}"
        lines.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(line)
