import math

import numpy as np
import pytest

from src.bounds import annealed_lower_bound, annealed_upper_bound
from src.ct_core import check_compatible, edge_pairs
from src.duality import log_xi_truncated
from src.exception import DivergenceError, DomainError, StructuralError
from src.mc import (ChainState, JointChain, JointChainConfig, McRun, batch_means_se, estimate_free_energy,
                    exact_joint_distribution, histogram_check, jackknife, satisfied_count, sw_sweep, sw_update,
                    triangulation_move)
from src.spin_exact import potts_measure_exact, spin_index
from src.utils import load_object, save_object


def _quiet(tmp_path, trace_every=0):
    return JointChainConfig(trace_path=str(tmp_path / "trace.csv"),
                            checkpoint_path=str(tmp_path / "checkpoint.json"), trace_every=trace_every)


class TestState:
    def test_minimal_state(self):
        s = ChainState.minimal(3, 2, seed=1)
        assert s.widths == (1, 1, 1)
        assert s.volume == 6
        assert s.energy == -satisfied_count(s.pairs, s.spins)
        assert s.spin_config().values.min() >= 1

    def test_moves_keep_geometry_valid(self):
        s = ChainState.minimal(2, 3, seed=4)
        for _ in range(2000):
            triangulation_move(s, 0.4, 1.0, 3, K_max=4)
            assert max(s.widths) <= 4
        check_compatible(s.strips)
        V, _ = edge_pairs(s.strips)
        assert V == len(s.spins)
        s.check_energy()
        assert s.accepted > 0
        assert s.rejected_bounds > 0

    def test_words_stay_rooted(self):
        s = ChainState.minimal(1, 2, seed=9)
        for _ in range(500):
            triangulation_move(s, 0.5, 0.9, 2, K_max=3)
            assert all(strip.word[0] == "U" for strip in s.strips)

    def test_swendsen_wang_keeps_cache(self):
        s = ChainState.minimal(2, 3, seed=2)
        for _ in range(50):
            triangulation_move(s, 0.8, 1.0, 3, K_max=3)
            sw_sweep(s, 0.8, 3)
            s.check_energy()
        assert s.last_clusters >= 1

    def test_frozen_clusters_at_large_beta(self):
        # all edges satisfied and p ~ 1: one cluster takes one colour
        pairs = np.array([[0, 1], [1, 2], [2, 0]])
        spins, k = sw_update(3, pairs, np.zeros(3, dtype=np.int64), 50.0, 4, np.random.default_rng(0))
        assert k == 1
        assert len(set(spins.tolist())) == 1

    def test_corrupted_cache_is_detected(self):
        s = ChainState.minimal(2, 2, seed=0)
        s.satisfied += 1
        with pytest.raises(StructuralError):
            s.check_energy()


class TestSwendsenWang:
    def test_stationary_law_matches_exact_potts_measure(self, two_strip):
        q, beta, updates, n_batches = 3, 0.8, 60_000, 30
        pairs = np.array([[e.tail, e.head] for e in two_strip.edges])
        V = two_strip.num_vertices
        exact = potts_measure_exact(two_strip, q, beta)
        rng = np.random.default_rng(11)
        spins = np.zeros(V, dtype=np.int64)
        visits = np.empty(updates, dtype=np.int64)
        for i in range(updates):
            spins, _ = sw_update(V, pairs, spins, beta, q, rng)
            visits[i] = spin_index(spins, q)
        size = updates // n_batches
        freq = np.stack([np.bincount(visits[b * size:(b + 1) * size], minlength=len(exact)) / size
                         for b in range(n_batches)])
        se = np.maximum(freq.std(axis=0, ddof=1) / math.sqrt(n_batches), np.sqrt(exact * (1 - exact) / updates))
        z = np.abs(freq.mean(axis=0) - exact) / se
        assert z.max() <= 5.0

    def test_two_spins_align_with_exact_frequency(self):
        beta, q, updates = 1.0, 2, 40_000
        pairs = np.array([[0, 1]])
        rng = np.random.default_rng(3)
        spins = np.array([0, 1])
        aligned = 0
        for _ in range(updates):
            spins, _ = sw_update(2, pairs, spins, beta, q, rng)
            aligned += spins[0] == spins[1]
        assert aligned / updates == pytest.approx(math.exp(beta) / (math.exp(beta) + 1), abs=0.01)


class TestExactLaw:
    def test_state_count(self):
        exact = exact_joint_distribution(2, 2, 0.5, 1.5, 2)
        assert len(exact) == 180
        assert sum(exact.values()) == pytest.approx(1.0)

    def test_marginal_matches_annealed_partition(self):
        # weight of the one-vertex state over the annealed partition function
        beta, mu, q = 0.5, 1.5, 2
        exact = exact_joint_distribution(1, 2, beta, mu, q)
        minimal = (("UD",), (0,))
        total = math.exp(log_xi_truncated(1, 2, beta, mu, q))
        assert exact[minimal] == pytest.approx(math.exp(-2 * mu + 3 * beta) / total, rel=1e-9)


class TestChain:
    def test_histogram_against_exact_law(self, tmp_path):
        chain = JointChain(2, 2, 0.5, 1.5, 2, seed=7, config=_quiet(tmp_path))
        report = histogram_check(chain, 200_000, burn_in=2000, z_max=4.5)
        assert report["states"] == 180
        assert report["ok"], report

    def test_checkpoint_resumes_identically(self, tmp_path):
        cfg = _quiet(tmp_path)
        chain = JointChain(2, 3, 0.6, 1.2, 3, seed=21, config=cfg)
        chain.run(200)
        path = chain.save_checkpoint()
        resumed = JointChain.from_checkpoint(path, config=cfg)
        assert resumed.params == chain.params
        chain.run(100)
        resumed.run(100)
        assert resumed.state.key() == chain.state.key()
        assert resumed.state.steps == chain.state.steps

    def test_checkpoint_version(self, tmp_path):
        chain = JointChain(1, 2, 0.5, 1.5, 2, seed=1, config=_quiet(tmp_path))
        path = chain.save_checkpoint()
        raw = load_object(path)
        raw["version"] = 99
        save_object(path, raw)
        with pytest.raises(StructuralError):
            JointChain.from_checkpoint(path)

    def test_invalid_parameters(self):
        with pytest.raises(DomainError):
            JointChain(0, 2, 0.5, 1.5, 2)
        with pytest.raises(DomainError):
            JointChain(1, 2, 0.5, 1.5, 1)

    def test_trace_is_reproducible(self, tmp_path):
        outputs = []
        for run in ("a", "b"):
            cfg = JointChainConfig(trace_path=str(tmp_path / f"{run}.csv"),
                                   checkpoint_path=str(tmp_path / f"{run}.json"), trace_every=10)
            McRun(cfg).initiate_mc_run(2, 2, 0.5, 1.5, 2, 300, seed=5)
            outputs.append((tmp_path / f"{run}.csv").read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0].splitlines()[0] == b"step,n_t,energy,k_clusters,accept_rate"


class TestStatistics:
    def test_batch_means(self):
        mean, se = batch_means_se(np.ones(500), n_batches=10)
        assert mean == 1.0 and se == 0.0
        with pytest.raises(DomainError):
            batch_means_se(np.ones(5), n_batches=10)

    def test_jackknife_of_sample_mean(self):
        x = np.random.default_rng(0).normal(size=40)
        mean, err = jackknife(x)
        assert mean == pytest.approx(x.mean())
        # for the plain mean the jackknife error is the usual standard error
        assert err == pytest.approx(x.std(ddof=1) / math.sqrt(len(x)))


class TestFreeEnergy:
    def test_refuses_no_gibbs_region(self):
        with pytest.raises(DivergenceError):
            estimate_free_energy(2, 0.5, 0.1, 2, sweeps=10, rng=0)

    def test_zero_coupling_is_exact(self):
        est = estimate_free_energy(1, 0.0, 2.0, 2, sweeps=10, rng=0)
        assert est.error == 0.0
        assert est.value == pytest.approx(log_xi_truncated(1, 2, 0.0, 2.0, 2), abs=1e-9)

    def test_thermodynamic_integration(self):
        N, K, beta, mu, q = 2, 2, 0.5, 2.5, 2
        est = estimate_free_energy(N, beta, mu, q, sweeps=4000, rng=3, K_max=K, burn_in=500)
        exact = log_xi_truncated(N, K, beta, mu, q) / N
        assert est.error > 0
        assert abs(est.value - exact) <= 3 * est.error
        assert len(est.nodes) == 8

    def test_estimate_lies_in_annealed_sandwich(self):
        N, K, beta, mu, q = 2, 2, 0.5, 2.5, 2
        est = estimate_free_energy(N, beta, mu, q, sweeps=2000, rng=5, K_max=K, burn_in=500)
        lo = annealed_lower_bound(N, beta, mu, q, K).log_value / N
        hi = annealed_upper_bound(N, beta, mu, q, K).log_value / N
        assert lo - 3 * est.error <= est.value <= hi + 3 * est.error
