import pytest

from src.ct_core import SLICE, Edge, EmbeddedGraph, Strip, build_graph, enumerate_triangulations


@pytest.fixture(scope="session")
def single_strip():
    """N = 1, width 1: one vertex, three self-loops, two triangles."""
    return build_graph([Strip(1, 1, "UD", 0)])


@pytest.fixture(scope="session")
def single_edge():
    """Two vertices joined by one edge; no faces, only used for partition function checks."""
    return EmbeddedGraph(num_vertices=2, edges=(Edge(0, 0, 1, SLICE, (0, 0)),), faces=())


@pytest.fixture(scope="session")
def small_triangulations():
    """Every rooted triangulation with N <= 2 and all widths <= 2 (4 + 14 of them)."""
    return [t for N in (1, 2) for t in enumerate_triangulations(N, 2)]


@pytest.fixture(scope="session")
def two_strip():
    return build_graph([Strip(2, 1, "UUD", 0), Strip(1, 2, "UDD", 0)])
