import numpy as np
import pytest

from fracpam.grid import GridSpec
from fracpam.kernels import build_G

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def spec_small():
    return GridSpec(8.0, 2**10)


@pytest.fixture(scope="session")
def spec_mid():
    return GridSpec(8.0, 2**12)


@pytest.fixture(scope="session")
def kernels_small(spec_small):
    return build_G(spec_small)


@pytest.fixture(scope="session")
def kernels_mid(spec_mid):
    return build_G(spec_mid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
