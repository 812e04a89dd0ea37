import functools

import pytest
from hypothesis import HealthCheck, settings

from speclab.geometry import PRESETS
from speclab.meshing import mesh_domain
from speclab.problems import Discretization

settings.register_profile("speclab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("speclab")


@functools.lru_cache(maxsize=None)
def discretization(preset: str, level: int, **params) -> Discretization:
    dom = PRESETS[preset](**params)
    return Discretization(dom, mesh_domain(dom, level))


@pytest.fixture(scope="session")
def disc_factory():
    return discretization


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance_line():
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
