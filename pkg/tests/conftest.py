import numpy as np
import pytest

from afpkit.serialize import load_subject, reference_path

from oracles import HOP3_ABS2


@pytest.fixture(scope="session")
def hop3_subject():
    return load_subject(reference_path())


@pytest.fixture(scope="session")
def hop3_matrix():
    return np.sqrt(np.array(HOP3_ABS2)).astype(complex)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance verdicts ---------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
