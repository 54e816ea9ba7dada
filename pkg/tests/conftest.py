import numpy as np
import pytest

from hnlslab.grid import make_grid, random_band_limited

# Acceptance verdicts collected during the session, printed in the summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion, printed immediately and in the summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(64, 64, 16.0, 16.0)


@pytest.fixture(scope="session")
def grid128():
    return make_grid(128, 128, 24.0, 24.0)


@pytest.fixture
def random_field(small_grid):
    return random_band_limited(small_grid, 3, (0.0, 4.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
