import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_connected_edges(rng, n_nodes, extra=0.3):
    """Random spanning tree plus extra edges, 1-based pairs."""
    order = rng.permutation(n_nodes) + 1
    edges = {tuple(sorted((int(order[v]), int(order[rng.integers(0, v)])))) for v in range(1, n_nodes)}
    for a in range(1, n_nodes + 1):
        for b in range(a + 1, n_nodes + 1):
            if rng.random() < extra:
                edges.add((a, b))
    return sorted(edges)


_ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, detail)."""

    def _record(number, passed, detail):
        _ACCEPTANCE[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
