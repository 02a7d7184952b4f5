import numpy as np
import pytest
from hypothesis import settings

from relaxgap.simplex import AlphabetProduct, JointDist

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def xy():
    return AlphabetProduct(("X", "Y"), (2, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def bern(p):
    return JointDist(AlphabetProduct(("X",), (2,)), np.array([1 - p, p]))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
