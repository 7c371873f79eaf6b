import numpy as np
import pytest

from walkembed.graph import Graph, from_edges


def build_graph(pairs, num_nodes) -> Graph:
    return from_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), num_nodes)


@pytest.fixture
def triangle() -> Graph:
    return build_graph([(0, 1), (1, 2), (2, 0)], 3)


@pytest.fixture
def path4() -> Graph:
    """Path 0-1-2-3."""
    return build_graph([(0, 1), (1, 2), (2, 3)], 4)


@pytest.fixture
def two_node() -> Graph:
    return build_graph([(0, 1)], 2)


@pytest.fixture
def star5() -> Graph:
    """K_{1,4}: center 0 with leaves 1..4."""
    return build_graph([(0, i) for i in range(1, 5)], 5)
