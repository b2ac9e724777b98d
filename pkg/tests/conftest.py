import numpy as np
import pytest

from uwbnbi.fbmcss.filterbank import FbmcConfig


@pytest.fixture(scope="session")
def cfg():
    return FbmcConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
