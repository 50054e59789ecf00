import math

import numpy as np
import pytest

from src.ct_core import SLICE, Edge, EmbeddedGraph
from src.exception import DomainError, ResourceError, StructuralError
from src.spin_exact import (BondConfig, ClusterCounter, PartitionPolynomial, cluster_counts, cluster_stats,
                            dual_config, edwards_sokal_check, fk_cluster_histogram, fk_log_partition,
                            fk_measure_exact, fk_partition_exact, p_from_beta, potts_log_partition,
                            potts_log_partition_via_clusters, potts_measure_exact, potts_partition_exact,
                            sample_es_coupled, spin_index)


class TestPottsPolynomial:
    def test_single_edge(self, single_edge):
        assert potts_partition_exact(single_edge, 2).coeffs == {0: 2, 1: 2}
        assert potts_partition_exact(single_edge, 3).coeffs == {0: 6, 1: 3}

    def test_self_loops_always_satisfied(self, single_strip):
        poly = potts_partition_exact(single_strip, 3)
        assert poly.coeffs == {3: 3}
        assert potts_log_partition(poly, 0.5) == pytest.approx(math.log(3) + 1.5)

    def test_total_is_number_of_configurations(self, small_triangulations):
        for t in small_triangulations[:6]:
            assert potts_partition_exact(t, 3).total() == 3 ** t.num_vertices

    def test_json(self, two_strip):
        poly = potts_partition_exact(two_strip, 2)
        back = PartitionPolynomial.from_json(poly.to_json())
        assert back == poly
        with pytest.raises(StructuralError):
            PartitionPolynomial.from_json('{"q": 2}')

    def test_budget(self, two_strip):
        with pytest.raises(ResourceError):
            potts_partition_exact(two_strip, 3, budget=10)

    def test_non_integer_q(self, single_edge):
        with pytest.raises(DomainError):
            potts_partition_exact(single_edge, 2.5)
        with pytest.raises(DomainError):
            potts_partition_exact(single_edge, 1)


class TestRandomCluster:
    def test_single_edge_clusters(self, single_edge):
        assert list(cluster_counts(single_edge)) == [2, 1]
        assert fk_cluster_histogram(single_edge) == {(0, 2): 1, (1, 1): 1}

    def test_single_edge_partition(self, single_edge):
        p, q = 0.3, 2.5
        assert fk_partition_exact(single_edge, p, q) == pytest.approx(p * q + (1 - p) * q * q)

    def test_endpoints_of_p(self, single_edge):
        # p = 0 keeps only the empty configuration, p = 1 only the full one
        assert fk_partition_exact(single_edge, 0.0, 3.0) == pytest.approx(9.0)
        assert fk_partition_exact(single_edge, 1.0, 3.0) == pytest.approx(3.0)

    def test_bond_budget(self, two_strip):
        with pytest.raises(ResourceError):
            cluster_counts(two_strip, budget=4)

    def test_edwards_sokal_identity(self, small_triangulations):
        for t in small_triangulations:
            for q in (2, 3, 4):
                assert edwards_sokal_check(t, q, [0.2, 0.7, 1.5]) <= 1e-9

    def test_potts_from_clusters(self, two_strip):
        hist = fk_cluster_histogram(two_strip)
        poly = potts_partition_exact(two_strip, 3)
        for beta in (0.1, 1.0, 4.0):
            via = potts_log_partition_via_clusters(hist, two_strip.num_edges, beta, 3)
            assert via == pytest.approx(poly.log_evaluate(beta), rel=1e-12)

    def test_reuses_histogram(self, two_strip):
        hist = fk_cluster_histogram(two_strip)
        assert fk_log_partition(two_strip, 0.4, 2, hist=hist) == pytest.approx(fk_log_partition(two_strip, 0.4, 2))

    def test_p_from_beta(self):
        assert p_from_beta(0.0) == 0.0
        assert p_from_beta(math.log(2)) == pytest.approx(0.5)


class TestClusterStatistics:
    def test_single_strip_extremes(self, single_strip):
        counter = ClusterCounter(single_strip)
        empty = counter.stats([0, 0, 0])
        assert (empty.o, empty.k, empty.f, empty.delta) == (0, 1, 1, 0)
        full = counter.stats([1, 1, 1])
        assert (full.o, full.k, full.f, full.delta) == (3, 1, 2, 2)
        one = counter.stats([1, 0, 0])
        assert one.delta == 1
        for s in (empty, full, one):
            assert s.euler_holds(1)

    def test_euler_formula_everywhere(self, small_triangulations):
        assert len(small_triangulations) == 18
        for t in small_triangulations:
            counter = ClusterCounter(t)
            for index in range(1 << t.num_edges):
                bits = [(index >> e) & 1 for e in range(t.num_edges)]
                stats = counter.stats(bits)
                dual_stats = counter.dual_stats(bits)
                assert stats.euler_holds(t.num_vertices)
                assert stats.delta + dual_stats.delta == 2
                assert stats.f == dual_stats.k
                assert dual_stats.f == stats.k

    def test_cluster_counts_agree_with_union_find(self, two_strip):
        ks = cluster_counts(two_strip)
        counter = ClusterCounter(two_strip)
        for index in (0, 5, 77, 255, (1 << two_strip.num_edges) - 1):
            bits = BondConfig.from_index(index, two_strip).bits
            assert counter.stats(bits).k == ks[index]

    def test_dual_config(self, two_strip):
        w = BondConfig.from_index(37, two_strip)
        w_star = dual_config(w)
        assert w_star.open_count == two_strip.num_edges - w.open_count
        assert w_star.host.num_vertices == two_strip.num_faces
        assert cluster_stats(w).c == w_star.open_count

    def test_bond_config_size(self, two_strip):
        with pytest.raises(StructuralError):
            BondConfig(np.zeros(3), two_strip)

    def test_needs_homology(self):
        bare = EmbeddedGraph(2, (Edge(0, 0, 1, SLICE, None),), ())
        with pytest.raises(StructuralError):
            ClusterCounter(bare)


class TestExactMeasures:
    def test_potts_measure(self, two_strip):
        probs = potts_measure_exact(two_strip, 2, 0.8)
        assert probs.sum() == pytest.approx(1.0)
        # the all-equal configurations are the most likely ones
        assert probs[spin_index(np.zeros(3), 2)] == pytest.approx(probs.max())

    def test_fk_measure(self, two_strip):
        probs = fk_measure_exact(two_strip, 0.4, 2.0)
        assert probs.size == 1 << two_strip.num_edges
        assert probs.sum() == pytest.approx(1.0)

    def test_coupled_sample_opens_only_satisfied_edges(self, two_strip):
        rng = np.random.default_rng(3)
        for _ in range(20):
            sigma, w = sample_es_coupled(two_strip, 3, 1.2, rng)
            assert sigma.values.min() >= 1 and sigma.values.max() <= 3
            for e in two_strip.edges:
                if w.bits[e.index]:
                    assert sigma.values[e.tail] == sigma.values[e.head]

    def test_coupled_marginal_of_bonds(self, single_edge):
        # P(edge open) = p e^beta / (e^beta + q - 1) on a single edge
        beta, q = 0.9, 2
        rng = np.random.default_rng(5)
        opened = np.mean([sample_es_coupled(single_edge, q, beta, rng)[1].bits[0] for _ in range(4000)])
        expected = p_from_beta(beta) * math.exp(beta) / (math.exp(beta) + q - 1)
        assert opened == pytest.approx(expected, abs=0.03)
