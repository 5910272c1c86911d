import pytest

from abscase.lathe import build_domains
from abscase.planner import Levels
from abscase.toy import counting_fixture, cube_fixture


@pytest.fixture(scope="session")
def cube():
    return cube_fixture()


@pytest.fixture(scope="session")
def counting():
    return counting_fixture()


@pytest.fixture(scope="session")
def cube_levels(cube):
    return Levels(cube.concrete, cube.abstract, cube.theory)


@pytest.fixture(scope="session")
def counting_levels(counting):
    return Levels(counting.concrete, counting.abstract, counting.theory)


@pytest.fixture(scope="session")
def lathe_domains():
    return build_domains()


@pytest.fixture(scope="session")
def lathe_levels(lathe_domains):
    return Levels(*lathe_domains)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
