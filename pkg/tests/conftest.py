"""Shared fixtures.  Solutions of the Laplace equation are expensive, so the
standard setups are solved once per session."""
import math

import pytest

from _setups import HEAVY_EXP, HEAVY_GAMMA, YULE, setup


@pytest.fixture(scope="session")
def yule():
    return setup(*YULE)


@pytest.fixture(scope="session")
def heavy_exp():
    return setup(*HEAVY_EXP)


@pytest.fixture(scope="session")
def heavy_gamma():
    return setup(*HEAVY_GAMMA)


@pytest.fixture(scope="session")
def ln2():
    return math.log(2.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
