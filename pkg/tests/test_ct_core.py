import math

import pytest

from src.ct_core import (DIAGONAL, SLICE, Strip, WidthSequence, build_graph, check_back_map, check_compatible,
                         count_triangulations, dualize, dump_triangulations, edge_pairs, enumerate_strip_sequences,
                         enumerate_strips, enumerate_triangulations, parse_triangulations, strip_count)
from src.exception import DomainError, StructuralError


class TestStrips:
    def test_strip_count(self):
        assert strip_count(3, 2) == 6
        assert strip_count(1, 5) == 1
        assert strip_count(2, 2) == 3

    def test_enumerate_strips_matches_count(self):
        for n in range(1, 7):
            for n_prime in range(1, 7):
                strips = enumerate_strips(n, n_prime)
                assert len(strips) == strip_count(n, n_prime) == math.comb(n + n_prime - 1, n - 1)
                assert len({s.word for s in strips}) == len(strips)
                assert all(s.word[0] == "U" and s.mark == 0 for s in strips)

    def test_enumerate_strips_sorted(self):
        words = [s.word for s in enumerate_strips(3, 2)]
        assert words == sorted(words)
        assert len(words) == 6

    def test_zero_width_rejected(self):
        with pytest.raises(DomainError):
            strip_count(0, 2)
        with pytest.raises(DomainError):
            Strip(0, 1, "D", 0)

    def test_bad_words_rejected(self):
        with pytest.raises(StructuralError):
            Strip(2, 1, "UDD", 0)
        with pytest.raises(StructuralError):
            Strip(1, 1, "UD", 1)
        with pytest.raises(StructuralError):
            Strip(1, 1, "UX", 0)

    def test_rerooting(self):
        s = Strip(2, 1, "UDU", 2)
        assert s.traversal == "UUD"
        assert s.canonical() == Strip(2, 1, "UUD", 0)
        assert s.same_rooted_strip(Strip(2, 1, "UUD", 0))
        assert not s.same_rooted_strip(Strip(2, 1, "UDU", 0))

    def test_width_sequence_is_cyclic(self):
        w = WidthSequence((1, 2, 3))
        assert w[3] == 1 and w[-1] == 3
        assert w.n_triangles == 12
        with pytest.raises(DomainError):
            WidthSequence((1, 0))


class TestCounting:
    def test_two_strips_width_two(self):
        assert count_triangulations(2, 2) == 14
        assert len(list(enumerate_triangulations(2, 2))) == 14

    def test_one_strip(self):
        # sum over n <= K of binom(2n - 1, n - 1)
        assert count_triangulations(1, 1) == 1
        assert count_triangulations(1, 3) == 1 + 3 + 10

    def test_enumeration_matches_count(self):
        for N in (1, 2, 3):
            for K in (1, 2, 3):
                assert sum(1 for _ in enumerate_strip_sequences(N, K)) == count_triangulations(N, K)

    def test_widths_filter(self):
        seqs = list(enumerate_strip_sequences(2, 2, widths_filter=[(2, 2)]))
        assert len(seqs) == 9
        assert all(s.lower_width == 2 for strips in seqs for s in strips)


class TestBuildGraph:
    def test_single_strip_cells(self, single_strip):
        t = single_strip
        assert (t.num_vertices, t.num_edges, t.num_faces) == (1, 3, 2)
        assert all(e.is_loop for e in t.edges)
        assert [e.kind for e in t.edges] == [SLICE, DIAGONAL, DIAGONAL]
        assert [e.crossing for e in t.edges] == [(0, 1), (1, 0), (1, -1)]

    def test_cell_counts_follow_triangle_count(self, small_triangulations):
        for t in small_triangulations:
            n = t.num_faces
            assert n == t.n_triangles == t.widths.n_triangles
            assert 2 * t.num_vertices == n
            assert 2 * t.num_edges == 3 * n
            assert t.euler_characteristic == 0

    def test_faces_are_homologically_trivial(self, small_triangulations):
        for t in small_triangulations:
            assert all(s == (0, 0) for s in t.face_crossing_sums())

    def test_every_edge_borders_two_face_sides(self, small_triangulations):
        for t in small_triangulations:
            uses = [0] * t.num_edges
            for face in t.faces:
                for idx, _ in face:
                    uses[idx] += 1
            assert uses == [2] * t.num_edges

    def test_slice_edges(self, two_strip):
        assert len(two_strip.slice_edges(0)) == 2
        assert len(two_strip.slice_edges(1)) == 1

    def test_edge_pairs_agree_with_graph(self, small_triangulations):
        for t in small_triangulations:
            V, pairs = edge_pairs(t.strips)
            assert V == t.num_vertices
            assert pairs == t.endpoint_pairs()

    def test_incompatible_strips(self):
        with pytest.raises(StructuralError):
            check_compatible([Strip(2, 1, "UUD", 0), Strip(2, 2, "UUDD", 0)])
        with pytest.raises(StructuralError):
            build_graph([Strip(1, 2, "UDD", 0)])


class TestDual:
    def test_dual_swaps_vertices_and_faces(self, small_triangulations):
        for t in small_triangulations:
            d = dualize(t)
            assert d.num_vertices == t.num_faces
            assert d.num_faces == t.num_vertices
            assert d.num_edges == t.num_edges
            assert d.euler_characteristic == 0
            assert d.has_homology
            assert all(s == (0, 0) for s in d.face_crossing_sums())

    def test_dual_is_trivalent(self, two_strip):
        d = dualize(two_strip)
        degree = [0] * d.num_vertices
        for e in d.edges:
            degree[e.tail] += 1
            degree[e.head] += 1
        assert degree == [3] * d.num_vertices

    def test_double_dual_reverses_orientation(self, two_strip):
        dd = dualize(dualize(two_strip))
        assert dd.num_vertices == two_strip.num_vertices
        assert dd.num_faces == two_strip.num_faces
        for e, f in zip(two_strip.edges, dd.edges):
            assert f.crossing == (-e.crossing[0], -e.crossing[1])
            assert {f.tail, f.head} == {e.tail, e.head}

    def test_back_map_must_be_bijective(self, two_strip):
        from dataclasses import replace
        d = dualize(two_strip)
        check_back_map(d)
        broken = replace(d, back_map=(0,) * d.num_edges)
        with pytest.raises(StructuralError):
            check_back_map(broken)


class TestTextFormat:
    def test_dump_and_parse(self):
        seqs = list(enumerate_strip_sequences(2, 2))
        text = dump_triangulations(seqs, 2, 2)
        assert text.splitlines()[0] == "2 2"
        N, K, parsed = parse_triangulations(text)
        assert (N, K) == (2, 2)
        assert parsed == seqs

    def test_single_triangulation_dump(self):
        text = dump_triangulations(enumerate_strip_sequences(1, 1), 1, 1)
        assert text == "1 1\n1 1 UD 0\n"

    @pytest.mark.parametrize("text", [
        "",
        "2\n1 1 UD 0\n",
        "2 2\n1 1 UD 0\n",
        "1 1\n1 1 UD\n",
        "1 1\n2 2 UUDD 0\n",
    ])
    def test_malformed_dump(self, text):
        with pytest.raises(StructuralError):
            parse_triangulations(text)
