import numpy as np
import pytest

from twochoices.graph import ClusteredRegularGraph, generate_clustered_regular


@pytest.fixture(scope="session")
def four_node_graph():
    """n=2, a=1, b=1: intra edges 0-1 and 2-3, cut edges 0-2 and 1-3."""
    adjacency = np.array(
        [[1, 2], [0, 3], [0, 3], [1, 2]],
        dtype=np.int32,
    )
    return ClusteredRegularGraph(n=2, d=2, b=1, adjacency=adjacency)


@pytest.fixture(scope="session")
def small_graph():
    return generate_clustered_regular(60, 8, 2, seed=3)


@pytest.fixture(scope="session")
def medium_graph():
    return generate_clustered_regular(100, 16, 1, seed=5)
