from src.union_find import HomologyUnionFind, UnionFind, lattice_rank


def test_components():
    uf = UnionFind(5)
    assert uf.union(0, 1)
    assert uf.union(3, 4)
    assert not uf.union(1, 0)
    assert uf.num_components == 3
    assert sorted(sorted(c) for c in uf.retrieve_components()) == [[0, 1], [2], [3, 4]]


def test_lattice_rank():
    assert lattice_rank([]) == 0
    assert lattice_rank([(0, 0)]) == 0
    assert lattice_rank([(2, 0), (-1, 0)]) == 1
    assert lattice_rank([(1, 1), (1, -1)]) == 2


def test_loop_classes_on_one_vertex():
    uf = HomologyUnionFind(1)
    uf.add_edge(0, 0, (1, 0))
    assert uf.component_ranks() == {0: 1}
    uf.add_edge(0, 0, (2, 0))
    assert uf.component_ranks() == {0: 1}
    uf.add_edge(0, 0, (1, -1))
    assert uf.component_ranks() == {0: 2}


def test_contractible_triangle_has_rank_zero():
    uf = HomologyUnionFind(3)
    uf.add_edge(0, 1, (0, 1))
    uf.add_edge(1, 2, (0, 0))
    uf.add_edge(0, 2, (0, 1))
    assert uf.num_components == 1
    assert list(uf.component_ranks().values()) == [0]


def test_potentials_survive_merges():
    uf = HomologyUnionFind(4)
    uf.add_edge(0, 1, (1, 0))
    uf.add_edge(2, 3, (0, 1))
    uf.add_edge(1, 2, (0, 0))
    # closing 3 -> 0 with the opposite total crossing is contractible
    uf.add_edge(3, 0, (-1, -1))
    assert uf.component_ranks()[uf.find_parent(0)] == 0
    # and with one extra temporal winding it is not
    uf.add_edge(3, 0, (0, -1))
    assert uf.component_ranks()[uf.find_parent(0)] == 1
