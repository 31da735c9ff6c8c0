import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from omx.model import TWO_PI, SystemParams  # noqa: E402

GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@pytest.fixture
def device():
    """Matched device, C1 = C2 = 1, eta = 0.45 on both modes."""
    return SystemParams.from_cooperativities(1.0, 1.0)


@pytest.fixture
def gamma_m():
    return TWO_PI * 20e3


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
