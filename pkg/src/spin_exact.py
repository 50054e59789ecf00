"""
Exact Potts and Fortuin-Kasteleyn partition functions on a fixed torus-embedded graph.

Z_P is kept exactly as integer coefficients of a polynomial in e^beta (m = number of satisfied
edges, self-loops always satisfied). Z_FK is evaluated in doubles from the exact (open edges,
clusters) histogram of all 2^|E| bond configurations. Both enumerations are vectorised with
numpy and processed in chunks of configurations.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import BOND_EDGE_BUDGET, CHUNK_SIZE, NUM_THREADS, SPIN_BUDGET
from src.ct_core import DualGraph, EmbeddedGraph, check_back_map, dualize
from src.exception import DomainError, ResourceError, StructuralError
from src.logger import logging
from src.union_find import HomologyUnionFind, UnionFind
from src.utils import log_sum_exp


def _check_q_int(q) -> int:
    if int(q) != q or q < 2:
        raise DomainError(f"spin enumeration needs an integer q >= 2, got {q!r}")
    return int(q)


def _check_q_real(q) -> float:
    q = float(q)
    if math.isnan(q) or q <= 0:
        raise DomainError(f"q must be > 0, got {q}")
    return q


def _check_p(p) -> float:
    p = float(p)
    if math.isnan(p) or not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return p


def _check_beta(beta) -> float:
    beta = float(beta)
    if math.isnan(beta) or beta < 0.0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    return beta


def p_from_beta(beta: float) -> float:
    return -math.expm1(-beta)


@dataclass
class SpinConfig:
    values: np.ndarray
    q: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.q < 2:
            raise DomainError(f"q must be >= 2, got {self.q}")
        if self.values.size and (self.values.min() < 1 or self.values.max() > self.q):
            raise DomainError(f"spin values must lie in 1..{self.q}")


@dataclass
class BondConfig:
    bits: np.ndarray
    host: EmbeddedGraph = field(repr=False)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.host.num_edges,):
            raise StructuralError(
                f"bond configuration has {self.bits.size} bits, host has {self.host.num_edges} edges")

    @classmethod
    def from_index(cls, index: int, host: EmbeddedGraph) -> "BondConfig":
        E = host.num_edges
        return cls(np.array([(index >> e) & 1 for e in range(E)], dtype=np.uint8), host)

    @property
    def open_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class ClusterStats:
    o: int
    c: int
    k: int
    f: int
    delta: int
    ranks: Tuple[int, ...]

    def euler_holds(self, num_vertices: int) -> bool:
        return num_vertices - self.o + self.f == self.k + 1 - self.delta


@dataclass
class PartitionPolynomial:
    q: int
    num_edges: int
    num_vertices: int
    coeffs: Dict[int, int]

    def total(self) -> int:
        return sum(self.coeffs.values())

    def log_evaluate(self, beta: float) -> float:
        """ln Z_P(beta) = ln sum_m C_m e^{beta m}."""
        return log_sum_exp(math.log(c) + beta * m for m, c in self.coeffs.items() if c > 0)

    def evaluate(self, beta: float) -> float:
        return math.exp(self.log_evaluate(beta))

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "E": self.num_edges,
            "V": self.num_vertices,
            "coeffs": {str(m): str(c) for m, c in sorted(self.coeffs.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PartitionPolynomial":
        try:
            raw = json.loads(text)
            return cls(
                q=int(raw["q"]),
                num_edges=int(raw["E"]),
                num_vertices=int(raw["V"]),
                coeffs={int(m): int(c) for m, c in raw["coeffs"].items()},
            )
        except (KeyError, ValueError, TypeError) as e:
            raise StructuralError(f"malformed partition polynomial: {e}")


def potts_log_partition(poly: PartitionPolynomial, beta: float) -> float:
    return poly.log_evaluate(_check_beta(beta))


def _split_edges(graph: EmbeddedGraph):
    loops = sum(1 for e in graph.edges if e.is_loop)
    proper = [e for e in graph.edges if not e.is_loop]
    tails = np.array([e.tail for e in proper], dtype=np.int64)
    heads = np.array([e.head for e in proper], dtype=np.int64)
    return loops, tails, heads


def _spin_block(q: int, V: int, start: int, stop: int) -> np.ndarray:
    """Rows are spin configurations in 0..q-1, vertex v is base-q digit v of the row index."""
    idx = np.arange(start, stop, dtype=np.int64)
    powers = q ** np.arange(V, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def _chunks(total: int, size: int = CHUNK_SIZE):
    for start in range(0, total, size):
        yield start, min(total, start + size)


def _map_chunks(fn, total: int) -> list:
    chunks = list(_chunks(total))
    if NUM_THREADS > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=NUM_THREADS) as pool:
            return list(pool.map(lambda c: fn(*c), chunks))
    return [fn(*c) for c in chunks]


def _check_spin_budget(q: int, V: int, budget: int) -> None:
    if q ** V > budget:
        raise ResourceError(f"q^|V| = {q}^{V} spin configurations exceed the budget",
                            required=q ** V, budget=budget)


def potts_partition_exact(graph: EmbeddedGraph, q: int, budget: int = SPIN_BUDGET) -> PartitionPolynomial:
    """Exact coefficients C_m of Z_P = sum_m C_m e^{beta m}."""
    q = _check_q_int(q)
    V, E = graph.num_vertices, graph.num_edges
    _check_spin_budget(q, V, budget)
    loops, tails, heads = _split_edges(graph)

    # global spin symmetry: fix vertex 0 and multiply by q
    free = V - 1

    def count(start, stop):
        spins = np.zeros((stop - start, V), dtype=np.int64)
        if free:
            spins[:, 1:] = _spin_block(q, free, start, stop)
        satisfied = (spins[:, tails] == spins[:, heads]).sum(axis=1) if tails.size else np.zeros(stop - start, dtype=np.int64)
        return np.bincount(satisfied, minlength=E + 1)

    counts = np.zeros(E + 1, dtype=np.int64)
    for partial in _map_chunks(count, q ** free):
        counts[:len(partial)] += partial
    coeffs = {m + loops: int(c) * q for m, c in enumerate(counts) if c}
    logging.info(f"potts partition: q={q} V={V} E={E} ({len(coeffs)} nonzero coefficients)")
    return PartitionPolynomial(q=q, num_edges=E, num_vertices=V, coeffs=coeffs)


def _check_bond_budget(E: int, budget: int) -> None:
    if E > budget:
        raise ResourceError(f"2^{E} bond configurations exceed the budget of 2^{budget}",
                            required=E, budget=budget)


def cluster_counts(graph: EmbeddedGraph, budget: int = BOND_EDGE_BUDGET) -> np.ndarray:
    """k(w) for every bond configuration; bit e of the configuration index is w(e)."""
    V, E = graph.num_vertices, graph.num_edges
    _check_bond_budget(E, budget)
    proper = [(e.index, e.tail, e.head) for e in graph.edges if not e.is_loop]

    def count(start, stop):
        idx = np.arange(start, stop, dtype=np.int64)
        labels = np.tile(np.arange(V, dtype=np.int64), (stop - start, 1))
        opened = [((idx >> e) & 1).astype(bool) for e, _, _ in proper]
        changed = True
        # min-label propagation until every cluster carries its smallest vertex index
        while changed:
            changed = False
            for is_open, (_, t, h) in zip(opened, proper):
                low = np.minimum(labels[:, t], labels[:, h])
                upd = is_open & ((labels[:, t] != low) | (labels[:, h] != low))
                if upd.any():
                    changed = True
                    labels[upd, t] = low[upd]
                    labels[upd, h] = low[upd]
        return (labels == np.arange(V)[None, :]).sum(axis=1)

    return np.concatenate(_map_chunks(count, 1 << E)) if E else np.array([V])


def open_counts(E: int) -> np.ndarray:
    idx = np.arange(1 << E, dtype=np.int64)
    counts = np.zeros(idx.size, dtype=np.int64)
    for e in range(E):
        counts += (idx >> e) & 1
    return counts


def fk_cluster_histogram(graph: EmbeddedGraph, budget: int = BOND_EDGE_BUDGET) -> Dict[Tuple[int, int], int]:
    """Number of bond configurations with o open edges and k clusters, keyed by (o, k)."""
    ks = cluster_counts(graph, budget)
    os_ = open_counts(graph.num_edges)
    hist: Dict[Tuple[int, int], int] = {}
    pairs, counts = np.unique(np.stack([os_, ks], axis=1), axis=0, return_counts=True)
    for (o, k), c in zip(pairs, counts):
        hist[(int(o), int(k))] = int(c)
    return hist


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0 else x * math.log(y)


def fk_log_partition_from_histogram(hist: Dict[Tuple[int, int], int], E: int, p: float, q: float) -> float:
    terms = []
    for (o, k), c in hist.items():
        if (o and p == 0.0) or (E - o and p == 1.0):
            continue
        terms.append(math.log(c) + _xlogy(o, p) + _xlogy(E - o, 1.0 - p) + k * math.log(q))
    return log_sum_exp(terms)


def fk_partition_exact(graph: EmbeddedGraph, p: float, q: float, budget: int = BOND_EDGE_BUDGET) -> float:
    """Z_FK(p, q) = sum_w p^{o(w)} (1 - p)^{c(w)} q^{k(w)}."""
    p, q = _check_p(p), _check_q_real(q)
    return math.exp(fk_log_partition(graph, p, q, budget))


def fk_log_partition(graph: EmbeddedGraph, p: float, q: float, budget: int = BOND_EDGE_BUDGET,
                     hist: Optional[Dict[Tuple[int, int], int]] = None) -> float:
    p, q = _check_p(p), _check_q_real(q)
    hist = fk_cluster_histogram(graph, budget) if hist is None else hist
    return fk_log_partition_from_histogram(hist, graph.num_edges, p, q)


def potts_log_partition_via_clusters(hist: Dict[Tuple[int, int], int], E: int, beta: float, q: float) -> float:
    """ln Z_P = beta |E| + ln Z_FK(1 - e^{-beta}, q), evaluated from the cluster histogram."""
    return beta * E + fk_log_partition_from_histogram(hist, E, p_from_beta(beta), q)


def edwards_sokal_check(graph: EmbeddedGraph, q: int, betas: Sequence[float],
                        spin_budget: int = SPIN_BUDGET, bond_budget: int = BOND_EDGE_BUDGET) -> float:
    """max over betas of |Z_FK - e^{-beta |E|} Z_P| / Z_FK, both sides computed independently."""
    poly = potts_partition_exact(graph, q, spin_budget)
    hist = fk_cluster_histogram(graph, bond_budget)
    E = graph.num_edges
    worst = 0.0
    for beta in betas:
        beta = _check_beta(beta)
        log_fk = fk_log_partition_from_histogram(hist, E, p_from_beta(beta), q)
        log_p = poly.log_evaluate(beta) - beta * E
        worst = max(worst, abs(math.expm1(log_p - log_fk)))
    logging.info(f"edwards-sokal check q={q}: max relative discrepancy {worst:.3e}")
    return worst


class ClusterCounter:
    """Cluster statistics for many configurations on one host graph; the dual is built once."""

    def __init__(self, host: EmbeddedGraph, dual: Optional[DualGraph] = None):
        if not host.has_homology:
            raise StructuralError("cluster statistics need homology annotations on every edge")
        self.host = host
        self.dual = dualize(host) if dual is None else dual
        check_back_map(self.dual)
        self._inverse = [0] * self.dual.num_edges
        for j, e in enumerate(self.dual.back_map):
            self._inverse[e] = j

    def homology_clusters(self, graph: EmbeddedGraph, bits) -> Tuple[int, List[int]]:
        uf = HomologyUnionFind(graph.num_vertices)
        for e in graph.edges:
            if bits[e.index]:
                if e.crossing is None:
                    raise StructuralError(f"edge {e.index} has no homology annotation")
                uf.add_edge(e.tail, e.head, e.crossing)
        ranks = sorted(uf.component_ranks().values(), reverse=True)
        return uf.num_components, ranks

    def dual_bits(self, bits) -> np.ndarray:
        return np.array([1 - bits[e] for e in self.dual.back_map], dtype=np.uint8)

    def stats(self, bits) -> ClusterStats:
        bits = np.asarray(bits, dtype=np.uint8)
        k, ranks = self.homology_clusters(self.host, bits)
        dual_bits = self.dual_bits(bits)
        uf = UnionFind(self.dual.num_vertices)
        for e in self.dual.edges:
            if dual_bits[e.index]:
                uf.union(e.tail, e.head)
        o = int(bits.sum())
        return ClusterStats(
            o=o,
            c=self.host.num_edges - o,
            k=k,
            f=uf.num_components,
            delta=_delta(ranks),
            ranks=tuple(ranks),
        )

    def dual_stats(self, bits) -> ClusterStats:
        """Statistics of w* on the dual; f of w* is k of w."""
        bits = np.asarray(bits, dtype=np.uint8)
        dual_bits = self.dual_bits(bits)
        k, ranks = self.homology_clusters(self.dual, dual_bits)
        uf = UnionFind(self.host.num_vertices)
        for e in self.host.edges:
            if bits[e.index]:
                uf.union(e.tail, e.head)
        o = int(dual_bits.sum())
        return ClusterStats(o=o, c=self.dual.num_edges - o, k=k, f=uf.num_components,
                            delta=_delta(ranks), ranks=tuple(ranks))


def _delta(ranks: Sequence[int]) -> int:
    top = max(ranks, default=0)
    return 2 if top >= 2 else (1 if top >= 1 else 0)


def cluster_stats(w: BondConfig, counter: Optional[ClusterCounter] = None) -> ClusterStats:
    counter = ClusterCounter(w.host) if counter is None else counter
    return counter.stats(w.bits)


def dual_config(w: BondConfig, dual: Optional[DualGraph] = None) -> BondConfig:
    """w*(e*) = 1 - w(e), hosted on the dual graph."""
    dual = dualize(w.host) if dual is None else dual
    check_back_map(dual)
    if dual.num_edges != w.host.num_edges:
        raise StructuralError("dual graph does not match the bond configuration's host")
    return BondConfig(np.array([1 - w.bits[e] for e in dual.back_map], dtype=np.uint8), dual)


def potts_measure_exact(graph: EmbeddedGraph, q: int, beta: float, budget: int = 10 ** 4) -> np.ndarray:
    """Probabilities of all q^|V| spin configurations (spins 0..q-1, vertex v is base-q digit v)."""
    q = _check_q_int(q)
    beta = _check_beta(beta)
    V = graph.num_vertices
    _check_spin_budget(q, V, budget)
    _, tails, heads = _split_edges(graph)
    spins = _spin_block(q, V, 0, q ** V)
    satisfied = (spins[:, tails] == spins[:, heads]).sum(axis=1) if tails.size else np.zeros(q ** V)
    logw = beta * satisfied
    w = np.exp(logw - logw.max())
    return w / w.sum()


def fk_measure_exact(graph: EmbeddedGraph, p: float, q: float, budget: int = BOND_EDGE_BUDGET) -> np.ndarray:
    """Probabilities of all 2^|E| bond configurations (bit e of the index is w(e))."""
    p, q = _check_p(p), _check_q_real(q)
    E = graph.num_edges
    ks = cluster_counts(graph, budget)
    os_ = open_counts(E)
    logw = _log_power(os_, p) + _log_power(E - os_, 1.0 - p) + ks * math.log(q)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def _log_power(exponents: np.ndarray, base: float) -> np.ndarray:
    """exponents * ln(base) with 0 * ln 0 = 0."""
    if base > 0.0:
        return exponents * math.log(base)
    return np.where(exponents > 0, -np.inf, 0.0)


def spin_index(spins: np.ndarray, q: int) -> int:
    """Inverse of the base-q ordering used by potts_measure_exact (spins in 0..q-1)."""
    return int(sum(int(s) * q ** v for v, s in enumerate(spins)))


def sample_es_coupled(graph: EmbeddedGraph, q: int, beta: float, seed,
                      budget: int = 10 ** 4) -> Tuple[SpinConfig, BondConfig]:
    """
    Exact draw from the Edwards-Sokal joint measure: sigma from the exact Potts measure, then
    each satisfied edge opened independently with probability p = 1 - e^{-beta}.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = potts_measure_exact(graph, q, beta, budget)
    index = int(rng.choice(probs.size, p=probs))
    spins = _spin_block(q, graph.num_vertices, index, index + 1)[0]
    p = p_from_beta(beta)
    bits = np.zeros(graph.num_edges, dtype=np.uint8)
    for e in graph.edges:
        if spins[e.tail] == spins[e.head] and rng.random() < p:
            bits[e.index] = 1
    return SpinConfig(spins + 1, q), BondConfig(bits, graph)
