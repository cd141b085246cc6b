import numpy as np
import pytest

from nodethin import NodeSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_nodeset(rng, n, scale=1.0):
    return NodeSet(rng.uniform(-scale, scale, size=(n, 2)))


def unit_grid(nx, ny):
    xs, ys = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float))
    return NodeSet(np.column_stack([xs.ravel(), ys.ravel()]))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion verdict lines after capture ends."""
    import sys

    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
