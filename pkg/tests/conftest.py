import numpy as np
import pytest

from rodhom.section import build_section


@pytest.fixture(scope="session")
def square():
    return build_section({"kind": "square"})


@pytest.fixture(scope="session")
def coarse_square():
    return build_section({"kind": "square"}, refine=4)


@pytest.fixture(scope="session")
def disk():
    return build_section({"kind": "disk"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(str(k).split("-")[0]), str(k))):
        terminalreporter.write_line(RESULTS[key])
