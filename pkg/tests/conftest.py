import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ldr_vms.bundled import bundled_scenario_path, haining_network  # noqa: E402
from ldr_vms.scenario import load_scenario  # noqa: E402


@pytest.fixture(scope="session")
def haining():
    return haining_network()


@pytest.fixture(scope="session")
def bundle():
    return load_scenario(bundled_scenario_path())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
