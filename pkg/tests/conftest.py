import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from minmaxcc.graph import PositiveGraph

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def graphs(draw, min_n=0, max_n=9):
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = np.array([p for p, keep in zip(pairs, mask) if keep], dtype=np.int64).reshape(-1, 2)
    return PositiveGraph(n, edges)


def cliques(sizes, extra=()):
    """Disjoint cliques on consecutive ids plus extra edges."""
    edges, start = [], 0
    for s in sizes:
        edges += [(start + i, start + j) for i in range(s) for j in range(i + 1, s)]
        start += s
    return PositiveGraph.from_pairs(start, edges + list(extra))


@pytest.fixture
def triangle():
    return PositiveGraph.from_pairs(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return PositiveGraph.from_pairs(3, [(0, 1), (1, 2)])


@pytest.fixture
def two_cliques():
    return cliques([5, 5])
