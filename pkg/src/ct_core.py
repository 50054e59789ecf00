"""
Rooted causal triangulations of the N-strip cylinder with periodic boundary.

A triangulation is a cyclically compatible sequence of strips. Each strip is a cyclic word over
{U, D} (up-triangles have their base on the lower slice, down-triangles on the upper slice) with a
marked up-triangle. Gluing is fixed by the marks: the marked up-triangle of strip i has base
(i, 0)-(i, 1) and apex (i+1, 0), so positions on every slice are labelled from the mark of the
strip above it and the apex of the mark of the strip below it.

Homology convention (vectors are (temporal, spatial) crossings for the edge orientation):
  * temporal cut just below slice 0: every strip-(N-1) diagonal, oriented lower -> upper, gets +1;
  * spatial cut just left of vertex 0 on every slice, continued through each strip alongside the
    mark's left diagonal: a slice edge (j, j+1) gets +1 when j = n-1, and a diagonal gets the
    difference of the wrap indicators of its unwrapped endpoints.
Every face boundary sums to (0, 0); `build_graph` asserts it.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from src.exception import DomainError, StructuralError
from src.logger import logging

UP = "U"
DOWN = "D"

SLICE = "slice"
DIAGONAL = "diagonal"
DUAL = "dual"

Vector = Tuple[int, int]
FaceBoundary = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class Strip:
    lower_width: int
    upper_width: int
    word: str
    mark: int = 0

    def __post_init__(self):
        if self.lower_width < 1 or self.upper_width < 1:
            raise DomainError(f"strip widths must be >= 1, got ({self.lower_width}, {self.upper_width})")
        if len(self.word) != self.lower_width + self.upper_width:
            raise StructuralError(
                f"word length {len(self.word)} != {self.lower_width} + {self.upper_width}")
        if set(self.word) - {UP, DOWN}:
            raise StructuralError(f"word {self.word!r} has letters outside {{U, D}}")
        if self.word.count(UP) != self.lower_width:
            raise StructuralError(
                f"word {self.word!r} has {self.word.count(UP)} up-triangles, expected {self.lower_width}")
        if not 0 <= self.mark < len(self.word) or self.word[self.mark] != UP:
            raise StructuralError(f"mark {self.mark} of {self.word!r} is not an up-triangle")

    @property
    def length(self) -> int:
        return self.lower_width + self.upper_width

    @property
    def traversal(self) -> str:
        """The word read cyclically starting at the marked up-triangle."""
        return self.word[self.mark:] + self.word[:self.mark]

    def canonical(self) -> "Strip":
        return Strip(self.lower_width, self.upper_width, self.traversal, 0)

    def same_rooted_strip(self, other: "Strip") -> bool:
        return (self.lower_width, self.upper_width, self.traversal) == (
            other.lower_width, other.upper_width, other.traversal)

    def diagonals(self) -> List[Tuple[int, int]]:
        """Unwrapped (lower, upper) positions of the left diagonal of every triangle, in traversal order."""
        a = b = 0
        out = []
        for letter in self.traversal:
            out.append((a, b))
            if letter == UP:
                a += 1
            else:
                b += 1
        return out


@dataclass(frozen=True)
class WidthSequence:
    widths: Tuple[int, ...]

    def __post_init__(self):
        if len(self.widths) < 1:
            raise DomainError("a width sequence needs at least one strip")
        if any(n < 1 for n in self.widths):
            raise DomainError(f"all widths must be >= 1, got {self.widths}")

    @property
    def N(self) -> int:
        return len(self.widths)

    def __getitem__(self, i: int) -> int:
        return self.widths[i % len(self.widths)]

    @property
    def n_triangles(self) -> int:
        return 2 * sum(self.widths)


@dataclass(frozen=True)
class Edge:
    index: int
    tail: int
    head: int
    kind: str
    crossing: Optional[Vector]

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class EmbeddedGraph:
    """Cellularly embedded multigraph on the torus; edges are addressed by index only."""

    num_vertices: int
    edges: Tuple[Edge, ...]
    faces: Tuple[FaceBoundary, ...]
    basis_cycles: Optional[Tuple[FaceBoundary, FaceBoundary]] = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces

    @property
    def has_homology(self) -> bool:
        return all(e.crossing is not None for e in self.edges)

    def endpoint_pairs(self) -> List[Tuple[int, int]]:
        return [(e.tail, e.head) for e in self.edges]

    def face_crossing_sums(self) -> List[Vector]:
        sums = []
        for face in self.faces:
            t = s = 0
            for idx, sign in face:
                c = self.edges[idx].crossing
                t += sign * c[0]
                s += sign * c[1]
            sums.append((t, s))
        return sums


@dataclass(frozen=True)
class CausalTriangulation(EmbeddedGraph):
    strips: Tuple[Strip, ...] = ()
    vertex_coords: Tuple[Tuple[int, int], ...] = ()
    face_kinds: Tuple[Tuple[str, int, int], ...] = ()

    @property
    def N(self) -> int:
        return len(self.strips)

    @property
    def widths(self) -> WidthSequence:
        return WidthSequence(tuple(s.lower_width for s in self.strips))

    @property
    def n_triangles(self) -> int:
        return sum(s.length for s in self.strips)

    def slice_edges(self, i: int) -> List[Edge]:
        return [e for e in self.edges if e.kind == SLICE and self.vertex_coords[e.tail][0] == i]


@dataclass(frozen=True)
class DualGraph(EmbeddedGraph):
    """t*: one vertex per face of the source graph, dual edge j crosses source edge back_map[j]."""

    back_map: Tuple[int, ...] = ()
    source_crossings: Tuple[Optional[Vector], ...] = ()


def _check_widths(*widths: int) -> None:
    for n in widths:
        if not isinstance(n, int) or n < 1:
            raise DomainError(f"width must be a positive integer, got {n!r}")


def strip_count(n: int, n_prime: int) -> int:
    """Number of rooted strips with lower width n and upper width n'."""
    _check_widths(n, n_prime)
    return math.comb(n + n_prime - 1, n - 1)


def enumerate_strips(n: int, n_prime: int) -> List[Strip]:
    """All rooted strips of widths (n, n'), canonical (mark at index 0), lexicographic in word."""
    _check_widths(n, n_prime)
    length = n + n_prime
    words = []
    for ups in itertools.combinations(range(1, length), n - 1):
        letters = [DOWN] * length
        letters[0] = UP
        for pos in ups:
            letters[pos] = UP
        words.append("".join(letters))
    return [Strip(n, n_prime, w, 0) for w in sorted(words)]


def width_sequences(N: int, max_width: int) -> Iterator[Tuple[int, ...]]:
    if N < 1 or max_width < 1:
        raise DomainError(f"need N >= 1 and K >= 1, got N={N}, K={max_width}")
    return itertools.product(range(1, max_width + 1), repeat=N)


def count_triangulations(N: int, max_width: int) -> int:
    total = 0
    for widths in width_sequences(N, max_width):
        total += math.prod(strip_count(widths[i], widths[(i + 1) % N]) for i in range(N))
    return total


def enumerate_strip_sequences(N: int, max_width: int,
                              widths_filter: Optional[Sequence[Tuple[int, ...]]] = None
                              ) -> Iterator[Tuple[Strip, ...]]:
    """Compatible strip sequences, lexicographic in width sequence then in strip words."""
    allowed = None if widths_filter is None else {tuple(w) for w in widths_filter}
    cache: Dict[Tuple[int, int], List[Strip]] = {}
    for widths in width_sequences(N, max_width):
        if allowed is not None and widths not in allowed:
            continue
        per_strip = []
        for i in range(N):
            key = (widths[i], widths[(i + 1) % N])
            if key not in cache:
                cache[key] = enumerate_strips(*key)
            per_strip.append(cache[key])
        yield from itertools.product(*per_strip)


def enumerate_triangulations(N: int, max_width: int) -> Iterator[CausalTriangulation]:
    """Every rooted CT with N strips and all widths <= K, each exactly once."""
    logging.info(f"enumerating triangulations N={N} K={max_width}")
    for strips in enumerate_strip_sequences(N, max_width):
        yield build_graph(strips)


def check_compatible(strips: Sequence[Strip]) -> None:
    if len(strips) < 1:
        raise StructuralError("a triangulation needs at least one strip")
    N = len(strips)
    for i, strip in enumerate(strips):
        nxt = strips[(i + 1) % N]
        if strip.upper_width != nxt.lower_width:
            raise StructuralError(
                f"strip {i} has upper width {strip.upper_width} but strip {(i + 1) % N} "
                f"has lower width {nxt.lower_width}")


def _wrap(x: int, n: int) -> int:
    return 1 if x == n else 0


def edge_pairs(strips: Sequence[Strip]) -> Tuple[int, List[Tuple[int, int]]]:
    """Vertex count and (tail, head) pairs in build_graph's edge order, without faces or homology."""
    check_compatible(strips)
    N = len(strips)
    offsets = [0] * N
    for i in range(1, N):
        offsets[i] = offsets[i - 1] + strips[i - 1].lower_width
    num_vertices = offsets[-1] + strips[-1].lower_width

    def vid(i, j):
        i %= N
        return offsets[i] + j % strips[i].lower_width

    pairs = []
    for i, strip in enumerate(strips):
        n = strip.lower_width
        pairs.extend((vid(i, j), vid(i, j + 1)) for j in range(n))
    for i, strip in enumerate(strips):
        pairs.extend((vid(i, a), vid(i + 1, b)) for a, b in strip.diagonals())
    return num_vertices, pairs


def build_graph(strips: Sequence[Strip]) -> CausalTriangulation:
    """Realize a compatible cyclic strip sequence as a torus-embedded multigraph."""
    strips = tuple(strips)
    check_compatible(strips)
    N = len(strips)
    widths = [s.lower_width for s in strips]
    offsets = [0] * N
    for i in range(1, N):
        offsets[i] = offsets[i - 1] + widths[i - 1]
    num_vertices = sum(widths)

    def vid(i, j):
        i %= N
        return offsets[i] + j % widths[i]

    coords = tuple((i, j) for i in range(N) for j in range(widths[i]))

    edges: List[Edge] = []
    for i in range(N):
        n = widths[i]
        for j in range(n):
            edges.append(Edge(len(edges), vid(i, j), vid(i, j + 1), SLICE, (0, _wrap(j + 1, n))))

    def slice_edge(i, j):
        i %= N
        return offsets[i] + j

    faces: List[FaceBoundary] = []
    face_kinds = []
    mark_diagonals = []
    for i, strip in enumerate(strips):
        n, n_up = strip.lower_width, strip.upper_width
        temporal = 1 if i == N - 1 else 0
        diag_index = []
        for a, b in strip.diagonals():
            diag_index.append(len(edges))
            edges.append(Edge(len(edges), vid(i, a), vid(i + 1, b), DIAGONAL,
                              (temporal, _wrap(b, n_up) - _wrap(a, n))))
        mark_diagonals.append(diag_index[0])
        L = strip.length
        for k, (letter, (a, b)) in enumerate(zip(strip.traversal, strip.diagonals())):
            left, right = diag_index[k], diag_index[(k + 1) % L]
            if letter == UP:
                faces.append(((slice_edge(i, a), 1), (right, 1), (left, -1)))
            else:
                faces.append(((right, 1), (slice_edge(i + 1, b), -1), (left, -1)))
            face_kinds.append((letter, i, k))

    basis = (
        tuple((slice_edge(0, j), 1) for j in range(widths[0])),
        tuple((d, 1) for d in mark_diagonals),
    )
    t = CausalTriangulation(
        num_vertices=num_vertices,
        edges=tuple(edges),
        faces=tuple(faces),
        basis_cycles=basis,
        strips=strips,
        vertex_coords=coords,
        face_kinds=tuple(face_kinds),
    )
    bad = [f for f, s in enumerate(t.face_crossing_sums()) if s != (0, 0)]
    if bad:
        raise StructuralError(f"face boundaries {bad} have non-zero homology")
    return t


def dualize(graph: EmbeddedGraph) -> DualGraph:
    """
    Dual graph: a vertex per face, dual edge j crosses edge j from its right face to its left face.

    Homology of dual edges is the pair of intersection numbers with the two basis cycles of the
    source graph; dualizing a dual graph restores the source annotations (reversed, since the
    double dual reverses every orientation).
    """
    E = graph.num_edges
    left: List[Optional[int]] = [None] * E
    right: List[Optional[int]] = [None] * E
    for f, face in enumerate(graph.faces):
        for idx, sign in face:
            slot = left if sign > 0 else right
            if slot[idx] is not None:
                raise StructuralError(f"edge {idx} is traversed twice with sign {sign}")
            slot[idx] = f
    missing = [e for e in range(E) if left[e] is None or right[e] is None]
    if missing:
        raise StructuralError(f"edges {missing} do not border exactly two face sides")

    if graph.basis_cycles is not None:
        inter = [[0, 0] for _ in range(E)]
        for axis, cycle in enumerate(graph.basis_cycles):
            for idx, sign in cycle:
                inter[idx][axis] += sign
        crossings = [tuple(v) for v in inter]
    elif isinstance(graph, DualGraph) and graph.source_crossings:
        crossings = [None if c is None else (-c[0], -c[1]) for c in graph.source_crossings]
    else:
        crossings = [None] * E

    edges = tuple(Edge(e, right[e], left[e], DUAL, crossings[e]) for e in range(E))

    stars: List[List[Tuple[int, int]]] = [[] for _ in range(graph.num_vertices)]
    for e in graph.edges:
        stars[e.tail].append((e.index, 1))
        stars[e.head].append((e.index, -1))

    return DualGraph(
        num_vertices=graph.num_faces,
        edges=edges,
        faces=tuple(tuple(s) for s in stars),
        basis_cycles=None,
        back_map=tuple(range(E)),
        source_crossings=tuple(e.crossing for e in graph.edges),
    )


def check_back_map(dual: DualGraph) -> None:
    if sorted(dual.back_map) != list(range(dual.num_edges)):
        raise StructuralError("dual back-map is not a bijection onto the primal edges")


# ---------------------------------------------------------------------------
# line-based text format
# ---------------------------------------------------------------------------

def format_strip(strip: Strip) -> str:
    return f"{strip.lower_width} {strip.upper_width} {strip.word} {strip.mark}"


def dump_triangulations(strip_sequences, N: int, max_width: int) -> str:
    """Header `N K`, then one block of N strip lines per triangulation, blocks separated by a blank line."""
    blocks = ["\n".join(format_strip(s) for s in strips) for strips in strip_sequences]
    return f"{N} {max_width}\n" + "\n\n".join(blocks) + ("\n" if blocks else "")


def parse_strip(line: str) -> Strip:
    parts = line.split()
    if len(parts) != 4:
        raise StructuralError(f"strip line needs `n n' word mark`, got {line!r}")
    try:
        n, n_prime, mark = int(parts[0]), int(parts[1]), int(parts[3])
    except ValueError:
        raise StructuralError(f"non-integer field in strip line {line!r}")
    return Strip(n, n_prime, parts[2], mark)


def parse_triangulations(text: str) -> Tuple[int, int, List[Tuple[Strip, ...]]]:
    lines = text.splitlines()
    if not lines:
        raise StructuralError("empty triangulation dump")
    header = lines[0].split()
    if len(header) != 2:
        raise StructuralError(f"header must be `N K`, got {lines[0]!r}")
    N, K = int(header[0]), int(header[1])
    body = [ln.strip() for ln in lines[1:]]
    blocks: List[List[str]] = [[]]
    for ln in body:
        if ln:
            blocks[-1].append(ln)
        elif blocks[-1]:
            blocks.append([])
    sequences = []
    for block in blocks:
        if not block:
            continue
        if len(block) != N:
            raise StructuralError(f"block has {len(block)} strip lines, header says N={N}")
        strips = tuple(parse_strip(ln) for ln in block)
        check_compatible(strips)
        if any(s.lower_width > K for s in strips):
            raise StructuralError(f"block {block!r} exceeds K={K}")
        sequences.append(strips)
    return N, K, sequences
