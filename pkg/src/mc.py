"""
Markov chain for the annealed joint measure P(t, sigma) ~ exp(-mu n(t) + beta m(t, sigma)) at
fixed N, where m counts satisfied edges (self-loops included).

Spin updates are Swendsen-Wang sweeps on the current triangulation. Geometry updates insert or
delete one vertex on a slice: an up-triangle goes into the strip above the slice and a
down-triangle into the strip below it, and the new vertex gets a uniform spin. Insertion choices
(slot in each word, spin) and deletion choices (U index, D index) are in bijection, so the
Metropolis-Hastings ratio only carries the two choice counts.

Spins are stored 0..q-1 internally.
"""

import math
import os
import sys
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.bounds import lower_curve, small_beta_constant
from src.config import ARTIFACTS_DIR, CHECKPOINT_VERSION
from src.ct_core import DOWN, UP, Strip, edge_pairs, enumerate_strip_sequences, format_strip, parse_strip
from src.exception import CustomException, DivergenceError, DomainError, StructuralError
from src.logger import logging
from src.spin_exact import SpinConfig, p_from_beta
from src.transfer import z_n_truncated
from src.union_find import UnionFind
from src.utils import load_object, save_object, save_table

TRACE_COLUMNS = ["step", "n_t", "energy", "k_clusters", "accept_rate"]
ENERGY_CHECK_EVERY = 10_000


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def satisfied_count(pairs: np.ndarray, spins: np.ndarray) -> int:
    return int(np.count_nonzero(spins[pairs[:, 0]] == spins[pairs[:, 1]]))


def sw_update(num_vertices: int, pairs: np.ndarray, spins: np.ndarray, beta: float, q: int,
              rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """One Swendsen-Wang sweep; returns the new spins and the FK cluster count."""
    p = p_from_beta(beta)
    tails, heads = pairs[:, 0], pairs[:, 1]
    opened = (spins[tails] == spins[heads]) & (tails != heads) & (rng.random(len(pairs)) < p)
    uf = UnionFind(num_vertices)
    for a, b in pairs[opened]:
        uf.union(int(a), int(b))
    colors = rng.integers(0, q, size=num_vertices)
    roots = np.array([uf.find_parent(v) for v in range(num_vertices)])
    return colors[roots], uf.num_components


@dataclass
class ChainState:
    strips: Tuple[Strip, ...]
    spins: np.ndarray
    q: int
    satisfied: int = 0
    steps: int = 0
    proposed: int = 0
    accepted: int = 0
    rejected_bounds: int = 0
    last_clusters: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)

    def __post_init__(self):
        self._pairs = None

    @classmethod
    def minimal(cls, N: int, q: int, seed) -> "ChainState":
        """All widths 1, uniform random spins."""
        rng = _rng(seed)
        strips = tuple(Strip(1, 1, UP + DOWN, 0) for _ in range(N))
        state = cls(strips, rng.integers(0, q, size=N), q, rng=rng)
        state.satisfied = satisfied_count(state.pairs, state.spins)
        return state

    @property
    def N(self) -> int:
        return len(self.strips)

    @property
    def widths(self) -> Tuple[int, ...]:
        return tuple(s.lower_width for s in self.strips)

    @property
    def volume(self) -> int:
        return 2 * sum(self.widths)

    @property
    def energy(self) -> int:
        """h(sigma) = -(number of satisfied edges)."""
        return -self.satisfied

    @property
    def pairs(self) -> np.ndarray:
        if self._pairs is None:
            _, pairs = edge_pairs(self.strips)
            self._pairs = np.array(pairs, dtype=np.int64)
        return self._pairs

    def set_geometry(self, strips: Tuple[Strip, ...], spins: np.ndarray, pairs: np.ndarray, satisfied: int):
        self.strips, self.spins, self._pairs, self.satisfied = strips, spins, pairs, satisfied

    def slice_offset(self, i: int) -> int:
        return sum(self.widths[:i])

    def spin_config(self) -> SpinConfig:
        return SpinConfig(self.spins + 1, self.q)

    def key(self) -> Tuple[Tuple[str, ...], Tuple[int, ...]]:
        return tuple(s.word for s in self.strips), tuple(int(s) for s in self.spins)

    def check_energy(self) -> None:
        actual = satisfied_count(self.pairs, self.spins)
        if actual != self.satisfied:
            raise StructuralError(f"cached satisfied-edge count {self.satisfied} != recomputed {actual}")

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def to_dict(self, params: Optional[dict] = None) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "params": params or {},
            "strips": [format_strip(s) for s in self.strips],
            "spins": [int(s) for s in self.spins],
            "q": self.q,
            "satisfied": self.satisfied,
            "steps": self.steps,
            "proposed": self.proposed,
            "accepted": self.accepted,
            "rejected_bounds": self.rejected_bounds,
            "last_clusters": self.last_clusters,
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ChainState":
        if raw.get("version") != CHECKPOINT_VERSION:
            raise StructuralError(f"unsupported checkpoint version {raw.get('version')!r}")
        rng = np.random.default_rng()
        rng.bit_generator.state = raw["rng"]
        state = cls(
            strips=tuple(parse_strip(line) for line in raw["strips"]),
            spins=np.array(raw["spins"], dtype=np.int64),
            q=int(raw["q"]),
            satisfied=int(raw["satisfied"]),
            steps=int(raw["steps"]),
            proposed=int(raw["proposed"]),
            accepted=int(raw["accepted"]),
            rejected_bounds=int(raw["rejected_bounds"]),
            last_clusters=int(raw["last_clusters"]),
            rng=rng,
        )
        state.check_energy()
        return state


def sw_sweep(state: ChainState, beta: float, q: int, rng: Optional[np.random.Generator] = None) -> ChainState:
    rng = state.rng if rng is None else rng
    spins, k = sw_update(len(state.spins), state.pairs, state.spins, beta, q, rng)
    state.spins = spins
    state.satisfied = satisfied_count(state.pairs, spins)
    state.last_clusters = k
    return state


def _insert(word: str, pos: int, letter: str) -> str:
    return word[:pos] + letter + word[pos:]


def _remove_nth(word: str, letter: str, index: int) -> str:
    seen = -1
    for pos, c in enumerate(word):
        if c == letter:
            seen += 1
            if seen == index:
                return word[:pos] + word[pos + 1:]
    raise StructuralError(f"word {word!r} has no {letter} with index {index}")


def _strips_from_words(words: Sequence[str]) -> Tuple[Strip, ...]:
    return tuple(Strip(w.count(UP), w.count(DOWN), w, 0) for w in words)


def triangulation_move(state: ChainState, beta: float, mu: float, q: int, K_max: int,
                       rng: Optional[np.random.Generator] = None) -> bool:
    """One Metropolis-Hastings vertex insertion or deletion on a uniformly chosen slice."""
    rng = state.rng if rng is None else rng
    N = state.N
    i = int(rng.integers(N))
    prev = (i - 1) % N
    n = state.widths[i]
    insert = rng.random() < 0.5
    state.proposed += 1
    words = [s.word for s in state.strips]
    offset = state.slice_offset(i)

    if insert:
        if n + 1 > K_max:
            state.rejected_bounds += 1
            return False
        L = len(words[i])
        slot = int(rng.integers(1, L + 1))
        r = words[i][:slot].count(UP)
        words[i] = _insert(words[i], slot, UP)
        L_prev = len(words[prev])
        words[prev] = _insert(words[prev], int(rng.integers(1, L_prev + 1)), DOWN)
        spins = np.insert(state.spins, offset + r, int(rng.integers(q)))
        log_choice = math.log(L * L_prev * q / (n * (n + 1)))
        d_volume = 2
    else:
        if n < 2:
            state.rejected_bounds += 1
            return False
        r = int(rng.integers(1, n))
        r_down = int(rng.integers(n))
        words[prev] = _remove_nth(words[prev], DOWN, r_down)
        words[i] = _remove_nth(words[i], UP, r)
        spins = np.delete(state.spins, offset + r)
        n_x = n - 1
        L = len(words[i])
        L_prev = len(words[prev]) + (1 if N == 1 else 0)
        log_choice = math.log(n_x * (n_x + 1) / (L * L_prev * q))
        d_volume = -2

    strips = _strips_from_words(words)
    _, pairs = edge_pairs(strips)
    pairs = np.array(pairs, dtype=np.int64)
    satisfied = satisfied_count(pairs, spins)
    log_ratio = -mu * d_volume + beta * (satisfied - state.satisfied) + log_choice
    if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
        state.set_geometry(strips, spins, pairs, satisfied)
        state.accepted += 1
        return True
    return False


def exact_joint_distribution(N: int, K: int, beta: float, mu: float, q: int) -> Dict[tuple, float]:
    """P(t, sigma) for every state with all widths <= K, keyed like ChainState.key()."""
    logw = {}
    for strips in enumerate_strip_sequences(N, K):
        V, pairs = edge_pairs(strips)
        pairs = np.array(pairs, dtype=np.int64)
        volume = sum(s.length for s in strips)
        words = tuple(s.word for s in strips)
        for spins in itertools.product(range(q), repeat=V):
            arr = np.array(spins)
            logw[(words, spins)] = -mu * volume + beta * satisfied_count(pairs, arr)
    top = max(logw.values())
    weights = {k: math.exp(v - top) for k, v in logw.items()}
    total = sum(weights.values())
    return {k: w / total for k, w in weights.items()}


def batch_means_se(series: np.ndarray, n_batches: int = 50) -> Tuple[float, float]:
    series = np.asarray(series, dtype=float)
    size = len(series) // n_batches
    if size < 1:
        raise DomainError(f"need at least {n_batches} samples for batch means, got {len(series)}")
    means = series[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


def jackknife(block_estimates: np.ndarray) -> Tuple[float, float]:
    """Leave-one-out jackknife over the first axis; input rows are block means of any statistic."""
    blocks = np.asarray(block_estimates, dtype=float)
    B = blocks.shape[0]
    total = blocks.sum(axis=0)
    loo = (total - blocks) / (B - 1)
    mean = blocks.mean(axis=0)
    err = np.sqrt((B - 1) / B * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return mean, err


@dataclass
class JointChainConfig:
    trace_path: str = os.path.join(ARTIFACTS_DIR, "mc_trace.csv")
    checkpoint_path: str = os.path.join(ARTIFACTS_DIR, "mc_checkpoint.json")
    moves_per_step: int = 1
    trace_every: int = 100


class JointChain:
    """Alternates triangulation moves and Swendsen-Wang sweeps at fixed (N, K_max, beta, mu, q)."""

    def __init__(self, N: int, K_max: int, beta: float, mu: float, q: int, seed=None,
                 config: Optional[JointChainConfig] = None, state: Optional[ChainState] = None):
        if N < 1 or K_max < 1:
            raise DomainError(f"need N >= 1 and K_max >= 1, got N={N}, K_max={K_max}")
        if beta < 0 or q < 2:
            raise DomainError(f"need beta >= 0 and integer q >= 2, got beta={beta}, q={q}")
        self.N, self.K_max, self.beta, self.mu, self.q = N, K_max, beta, mu, int(q)
        self.chain_config = config or JointChainConfig()
        self.state = state if state is not None else ChainState.minimal(N, self.q, seed)
        self.trace: List[dict] = []

    @property
    def params(self) -> dict:
        return {"N": self.N, "K_max": self.K_max, "beta": self.beta, "mu": self.mu, "q": self.q}

    def step(self) -> ChainState:
        s = self.state
        for _ in range(self.chain_config.moves_per_step):
            triangulation_move(s, self.beta, self.mu, self.q, self.K_max)
        sw_sweep(s, self.beta, self.q)
        s.steps += 1
        if s.steps % ENERGY_CHECK_EVERY == 0:
            s.check_energy()
        if self.chain_config.trace_every and s.steps % self.chain_config.trace_every == 0:
            self.trace.append({
                "step": s.steps,
                "n_t": s.volume,
                "energy": s.energy,
                "k_clusters": s.last_clusters,
                "accept_rate": s.accept_rate,
            })
        return s

    def run(self, steps: int, burn_in: int = 0, observe=None) -> list:
        for _ in range(burn_in):
            self.step()
        out = []
        for _ in range(steps):
            s = self.step()
            if observe is not None:
                out.append(observe(s))
        logging.info(f"joint chain {self.params}: {self.state.steps} steps, accept rate {self.state.accept_rate:.3f}, "
                     f"{self.state.rejected_bounds} width-bound rejections")
        return out

    def save_trace(self, path: Optional[str] = None):
        return save_table(path or self.chain_config.trace_path, self.trace, TRACE_COLUMNS)

    def save_checkpoint(self, path: Optional[str] = None) -> str:
        path = path or self.chain_config.checkpoint_path
        save_object(path, self.state.to_dict(self.params))
        return path

    @classmethod
    def from_checkpoint(cls, path: str, config: Optional[JointChainConfig] = None) -> "JointChain":
        raw = load_object(path)
        p = raw["params"]
        return cls(p["N"], p["K_max"], p["beta"], p["mu"], p["q"], config=config, state=ChainState.from_dict(raw))


def histogram_check(chain: JointChain, steps: int, burn_in: int = 1000, n_batches: int = 50,
                    z_max: float = 4.0) -> dict:
    """Chain histogram over all (t, sigma) states against the exact joint law, per-cell batch-means z-scores."""
    exact = exact_joint_distribution(chain.N, chain.K_max, chain.beta, chain.mu, chain.q)
    index = {k: j for j, k in enumerate(exact)}
    probs = np.array(list(exact.values()))
    visits = np.array(chain.run(steps, burn_in, observe=lambda s: index[s.key()]), dtype=np.int64)
    size = len(visits) // n_batches
    freq = np.stack([np.bincount(visits[b * size:(b + 1) * size], minlength=len(probs)) / size
                     for b in range(n_batches)])
    mean = freq.mean(axis=0)
    se = np.maximum(freq.std(axis=0, ddof=1) / math.sqrt(n_batches),
                    np.sqrt(probs * (1 - probs) / len(visits)))
    z = np.abs(mean - probs) / se
    report = {
        "params": chain.params,
        "steps": steps,
        "states": len(probs),
        "max_abs_z": float(z.max()),
        "cells_over": int((z > z_max).sum()),
        "ok": bool((z <= z_max).all()),
        "accept_rate": chain.state.accept_rate,
    }
    logging.info(f"histogram check: {report}")
    return report


@dataclass
class FreeEnergyEstimate:
    value: float
    error: float
    base: float
    nodes: List[dict]

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "base": self.base, "nodes": self.nodes}


def _in_no_gibbs_region(beta: float, mu: float, q: float) -> bool:
    bound = small_beta_constant(q) if beta == 0.0 else lower_curve(beta, q)
    return mu < bound


def estimate_free_energy(N: int, beta: float, mu: float, q: int, sweeps: int, rng, K_max: int = 2,
                         nodes: int = 8, burn_in: int = 500, blocks: int = 20) -> FreeEnergyEstimate:
    """
    (1/N) ln Xi_N by thermodynamic integration from beta = 0:
    ln Xi(beta) = ln Z_N(mu - ln q / 2) + int_0^beta <m> d beta', the integral by Gauss-Legendre
    with one chain per node and a jackknife error over blocks.
    """
    if _in_no_gibbs_region(beta, mu, q):
        raise DivergenceError(f"(beta={beta}, mu={mu}, q={q}) lies in the no-Gibbs region", verdict="no_gibbs")
    rng = _rng(rng)
    base = z_n_truncated(N, mu - 0.5 * math.log(q), K_max)
    if beta == 0.0:
        return FreeEnergyEstimate(base / N, 0.0, base / N, [])
    x, w = np.polynomial.legendre.leggauss(nodes)
    betas = 0.5 * beta * (x + 1.0)
    seeds = rng.integers(0, 2 ** 63 - 1, size=nodes)
    per_block = np.empty((blocks, nodes))
    node_rows = []
    for j, (b, seed) in enumerate(zip(betas, seeds)):
        chain = JointChain(N, K_max, float(b), mu, q, seed=int(seed), config=JointChainConfig(trace_every=0))
        series = np.array(chain.run(sweeps, burn_in, observe=lambda s: s.satisfied), dtype=float)
        size = len(series) // blocks
        per_block[:, j] = series[: size * blocks].reshape(blocks, size).mean(axis=1)
        node_rows.append({"beta": float(b), "mean_satisfied": float(series.mean())})
    integrals = per_block @ w * (0.5 * beta)
    mean, err = jackknife(integrals)
    value = (base + float(mean)) / N
    logging.info(f"free energy N={N} beta={beta} mu={mu} q={q}: {value:.6g} +- {float(err) / N:.2g}")
    return FreeEnergyEstimate(value, float(err) / N, base / N, node_rows)


class McRun:
    def __init__(self, config: Optional[JointChainConfig] = None):
        self.chain_config = config or JointChainConfig()

    def initiate_mc_run(self, N: int, K_max: int, beta: float, mu: float, q: int, steps: int, seed: int,
                        histogram: bool = False):
        logging.info(f"mc run N={N} K_max={K_max} beta={beta} mu={mu} q={q} steps={steps} seed={seed}")
        try:
            chain = JointChain(N, K_max, beta, mu, q, seed=seed, config=self.chain_config)
            if histogram:
                report = histogram_check(chain, steps)
            else:
                chain.run(steps)
                report = {"params": chain.params, "steps": steps, "accept_rate": chain.state.accept_rate, "ok": True}
            chain.save_trace()
            chain.save_checkpoint()
            return report
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys)
