"""Shared pytest fixtures for netctrl tests"""

import numpy as np
import pytest

from graphgen import GraphKind, GraphSpec, Partition, WeightedDigraph


@pytest.fixture
def path_graph():
    """Undirected path 0-1-2 with unit weights

    Returns:
        WeightedDigraph: Three vertices, two edges stored as four arcs
    """
    w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    return WeightedDigraph(3, w)


@pytest.fixture
def complete_graph3():
    """Complete graph on three vertices with unit weights"""
    return WeightedDigraph(3, np.ones((3, 3)) - np.eye(3))


@pytest.fixture
def last_leader_partition():
    """Followers 0 and 1, leader 2"""
    return Partition((0, 1), (2,))


@pytest.fixture
def er_spec():
    """ER family with the experiment defaults at 12 vertices"""
    return GraphSpec(kind=GraphKind.ER, n=12)


@pytest.fixture
def edge_list_file(tmp_path, path_graph):
    """Path graph written to an edge-list file

    Args:
        tmp_path: pytest fixture providing temporary directory
        path_graph: Fixture providing the path graph

    Returns:
        Path: Location of the edge list
    """
    from graphgen import write_edge_list
    return write_edge_list(path_graph, tmp_path / "path.edges")


@pytest.fixture
def rng():
    """Plain numpy generator for test data"""
    return np.random.default_rng(12345)
