import numpy as np
import pytest

from kreinwave import strings

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# layer widths of the two-material string: slow decay falls outside the Szego class
def slow_delta(n):
    return 1 / np.sqrt(np.asarray(n, dtype=float) + 1)


def fast_delta(n):
    return 1 / (np.asarray(n, dtype=float) + 1) ** 2


@pytest.fixture(scope="session")
def slow_string():
    return strings.two_material_string(2.0, 1.0, slow_delta(np.arange(130)), 131)


@pytest.fixture(scope="session")
def fast_string():
    return strings.two_material_string(2.0, 1.0, fast_delta(np.arange(130)), 131)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
