import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dhap import grid
from dhap.functions import DyadicFunction

settings.register_profile("dhap", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dhap")


def tile(k, j, M):
    return grid.lacunary(k, j, M)


def cells(M, pieces):
    """Function on the grid with exponent ``M`` from ``(left, right, value)`` triples."""
    n = 1 << (2 * M)
    v = np.zeros(n)
    w = 2.0**-M
    for a, b, c in pieces:
        v[int(round(a / w)):int(round(b / w))] += c
    return DyadicFunction(M, v)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
small_m = st.integers(min_value=1, max_value=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
