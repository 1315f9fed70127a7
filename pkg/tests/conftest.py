import numpy as np
import pytest

from dgbem.mesh import refine_uniform, triangulate_polygon

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def square0():
    return triangulate_polygon("square")


@pytest.fixture(scope="session")
def square1():
    return triangulate_polygon("square", 1)


@pytest.fixture(scope="session")
def square2(square1):
    return refine_uniform(square1)


@pytest.fixture(scope="session")
def lshape1():
    return triangulate_polygon("lshape", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1]), s)):
            terminalreporter.write_line(line)
