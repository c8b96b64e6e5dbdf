import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bmnet.network import DiscreteNetwork, NodeSpec, random_cpts  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def chain():
    """A -> B with theta_A = (0.6, 0.4), theta_B|A=0 = (0.8, 0.2)."""
    return DiscreteNetwork(
        (
            NodeSpec("A", 2, (), np.array([[0.6, 0.4]])),
            NodeSpec("B", 2, (0,), np.array([[0.8, 0.2], [0.3, 0.7]])),
        )
    )


def random_network(seed, v=None, max_card=3, edge_p=0.5):
    """Random DAG (node order is topological) with Dirichlet CPTs."""
    rng = np.random.default_rng(seed)
    v = v or int(rng.integers(2, 5))
    cards = [int(rng.integers(2, max_card + 1)) for _ in range(v)]
    nodes = []
    for i in range(v):
        parents = tuple(p for p in range(i) if rng.random() < edge_p)
        nodes.append(NodeSpec(f"X{i}", cards[i], parents))
    return random_cpts(DiscreteNetwork(tuple(nodes)), rng.integers(1 << 31))


@pytest.fixture
def make_network():
    return random_network


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
