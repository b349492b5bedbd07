import numpy as np
import pytest

from levymax.levy import LevyParams
from levymax.model import Theta

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run tests marked slow (hours of CPU)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; enable with --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""
    def check(label: str, passed: bool, detail: str):
        line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return check


@pytest.fixture
def bmg():
    return LevyParams(b=1.0, sigma=0.5, alpha=1.5, beta=2.0)


@pytest.fixture
def theta(bmg):
    return Theta(bmg, np.eye(2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
