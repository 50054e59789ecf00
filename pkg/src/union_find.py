"""
Union-find for cluster counting on torus-embedded graphs.

`UnionFind` counts connected components with path compression.
`HomologyUnionFind` additionally keeps, for every element, the homology offset (an integer
vector in Z^2) of the tree path to its root; an edge closing a cycle inside one component then
yields that cycle's homology class directly, without a separate spanning-tree pass.
"""

from typing import Dict, List, Tuple

Vector = Tuple[int, int]


def lattice_rank(vectors) -> int:
    """Rank over Q of a set of integer 2-vectors, using exact integer determinants."""
    pivot = None
    for v in vectors:
        if v[0] == 0 and v[1] == 0:
            continue
        if pivot is None:
            pivot = v
            continue
        if pivot[0] * v[1] - pivot[1] * v[0] != 0:
            return 2
    return 0 if pivot is None else 1


class UnionFind:
    """Simple union-find counting connected components (isolated elements included)."""

    def __init__(self, size: int):
        self.size = size
        self.parents = list(range(size))
        self.num_components = size

    def find_parent(self, elem: int) -> int:
        p = elem
        while p != self.parents[p]:
            p = self.parents[p]

        # compress the path so every visited element points at the root
        while elem != p:
            nxt = self.parents[elem]
            self.parents[elem] = p
            elem = nxt
        return p

    def union(self, a: int, b: int) -> bool:
        p1 = self.find_parent(a)
        p2 = self.find_parent(b)
        if p1 == p2:
            return False
        self.parents[p2] = p1
        self.num_components -= 1
        return True

    def retrieve_components(self) -> List[List[int]]:
        components: Dict[int, List[int]] = {}
        for i in range(self.size):
            components.setdefault(self.find_parent(i), []).append(i)
        return list(components.values())


class HomologyUnionFind(UnionFind):
    """
    Union-find whose elements carry Z^2 potentials relative to their root.

    offset[x] is the homology of the tree path root -> x. Adding an oriented edge u -> v with
    crossing vector c either merges two components (the potentials are re-based so that
    pot(v) = pot(u) + c) or closes a cycle whose class is pot(u) + c - pot(v).
    """

    def __init__(self, size: int):
        super().__init__(size)
        self.offset: List[Vector] = [(0, 0)] * size
        self.cycle_classes: Dict[int, List[Vector]] = {}

    def find_parent(self, elem: int) -> int:
        path = []
        p = elem
        while p != self.parents[p]:
            path.append(p)
            p = self.parents[p]
        # walk back from the element nearest the root, accumulating offsets
        acc = (0, 0)
        for node in reversed(path):
            o = self.offset[node]
            acc = (acc[0] + o[0], acc[1] + o[1])
            self.offset[node] = acc
            self.parents[node] = p
        return p

    def potential(self, elem: int) -> Vector:
        self.find_parent(elem)
        return self.offset[elem] if self.parents[elem] != elem else (0, 0)

    def add_edge(self, u: int, v: int, crossing: Vector) -> None:
        ru, rv = self.find_parent(u), self.find_parent(v)
        pu, pv = self.potential(u), self.potential(v)
        if ru == rv:
            cls = (pu[0] + crossing[0] - pv[0], pu[1] + crossing[1] - pv[1])
            self.cycle_classes.setdefault(ru, []).append(cls)
            return
        # attach rv under ru with pot(v) = pot(u) + crossing
        shift = (pu[0] + crossing[0] - pv[0], pu[1] + crossing[1] - pv[1])
        self.parents[rv] = ru
        self.offset[rv] = shift
        self.num_components -= 1
        moved = self.cycle_classes.pop(rv, None)
        if moved:
            self.cycle_classes.setdefault(ru, []).extend(moved)

    def component_ranks(self) -> Dict[int, int]:
        """Homology rank of every component, keyed by root."""
        ranks = {}
        for i in range(self.size):
            root = self.find_parent(i)
            if root not in ranks:
                ranks[root] = lattice_rank(self.cycle_classes.get(root, ()))
        return ranks
