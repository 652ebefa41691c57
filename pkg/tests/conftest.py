import numpy as np
import pytest

from dagfuse.graph import build_chain
from dagfuse.solver import SolverConfig


@pytest.fixture
def chain2():
    return build_chain(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cfg():
    return SolverConfig()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(mod.LINES):
            terminalreporter.write_line(mod.LINES[k])
