"""
Duality between the Potts/FK model on a causal triangulation t and on its dual t*.

With h = e^beta - 1 the temperature map is h h* = q. Per triangulation the Euler formula gives
    Z_FK(p, q, t) / Z_FK(p*, q, t*) = (p / (1 - p*))^{3n/2} q^{delta - 1 - n}   term by term,
so the ratio of partition functions lies between the delta = 0 and delta = 2 values. Summing over
any common set of triangulations carries the bounds over to the annealed partition functions.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

from src.config import BOND_EDGE_BUDGET, SPIN_BUDGET
from src.ct_core import EmbeddedGraph, dualize, enumerate_triangulations
from src.exception import DomainError
from src.logger import logging
from src.spin_exact import (PartitionPolynomial, fk_cluster_histogram, fk_log_partition_from_histogram,
                            p_from_beta, potts_partition_exact)
from src.utils import log_sum_exp

PRIMAL = "primal"
DUAL = "dual"

# rounding slack allowed on log-domain margins
MARGIN_TOL = 1e-9


@dataclass(frozen=True)
class CoupledParams:
    beta: float
    mu: float
    q: float
    side: str = PRIMAL

    def __post_init__(self):
        if math.isnan(self.beta) or self.beta <= 0.0:
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if math.isnan(self.q) or self.q < 2:
            raise DomainError(f"q must be >= 2, got {self.q}")
        if math.isnan(self.mu):
            raise DomainError("mu is NaN")
        if self.side not in (PRIMAL, DUAL):
            raise DomainError(f"side must be 'primal' or 'dual', got {self.side!r}")

    @property
    def p(self) -> float:
        return p_from_beta(self.beta)


def dual_beta(beta: float, q: float) -> float:
    """ln(1 + q / (e^beta - 1)); the map is its own inverse."""
    if math.isnan(beta) or beta <= 0.0:
        raise DomainError(f"beta must be > 0, got {beta}")
    return math.log1p(q / math.expm1(beta))


def dual_point(params: CoupledParams) -> CoupledParams:
    beta_star = dual_beta(params.beta, params.q)
    log_q = math.log(params.q)
    if params.side == PRIMAL:
        mu_star = params.mu - 1.5 * math.log(math.expm1(params.beta)) + log_q
        return CoupledParams(beta_star, mu_star, params.q, DUAL)
    mu = params.mu - 1.5 * math.log(math.expm1(params.beta)) + 0.5 * log_q
    return CoupledParams(beta_star, mu, params.q, PRIMAL)


def p_star(p: float, q: float) -> float:
    if math.isnan(p) or not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return (1.0 - p) * q / ((1.0 - p) * q + p)


def self_dual_beta(q: float) -> float:
    return math.log1p(math.sqrt(q))


def self_dual_p(q: float) -> float:
    return math.sqrt(q) / (1.0 + math.sqrt(q))


def dual_potts_relation(beta: float, q: float) -> dict:
    """Commentary value (3/2) ln(e^beta - 1) - ln q relating the quenched free energies; not a check."""
    return {
        "beta": beta,
        "beta_star": dual_beta(beta, q),
        "q": q,
        "relation": 1.5 * math.log(math.expm1(beta)) - math.log(q),
        "note": "quenched infinite-volume relation, no finite certificate",
    }


@dataclass
class InequalityReport:
    name: str
    params: Dict[str, float]
    log_lower: float
    log_value: float
    log_upper: float
    note: str = ""

    @property
    def lower_margin(self) -> float:
        return self.log_value - self.log_lower

    @property
    def upper_margin(self) -> float:
        return self.log_upper - self.log_value

    @property
    def lower_ok(self) -> bool:
        return self.lower_margin >= -MARGIN_TOL

    @property
    def upper_ok(self) -> bool:
        return self.upper_margin >= -MARGIN_TOL

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "params": self.params,
            "lhs": self.log_lower,
            "ratio": self.log_value,
            "rhs": self.log_upper,
            "ok": self.ok,
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "margin_log": {"lower": self.lower_margin, "upper": self.upper_margin},
        }
        if self.note:
            out["note"] = self.note
        return out


def _n_of(t: EmbeddedGraph) -> int:
    return t.num_faces


def fk_duality_check(t: EmbeddedGraph, p: float, q: float, swap: bool = False,
                     budget: int = BOND_EDGE_BUDGET) -> InequalityReport:
    """
    Z_FK(p, q, t) / Z_FK(p*, q, t*) against (p/(1-p*))^{3n/2} q^{-1-n} and (p/(1-p*))^{3n/2} q^{1-n}.
    With swap=True the ratio is inverted, i.e. t* plays the primal role.
    """
    ps = p_star(p, q)
    n = _n_of(t)
    dual = dualize(t)
    log_z = fk_log_partition_from_histogram(fk_cluster_histogram(t, budget), t.num_edges, p, q)
    log_z_dual = fk_log_partition_from_histogram(fk_cluster_histogram(dual, budget), dual.num_edges, ps, q)
    base = 1.5 * n * math.log(p / (1.0 - ps))
    log_q = math.log(q)
    if not swap:
        report = InequalityReport("fk_duality", {"p": p, "p_star": ps, "q": q, "n": n},
                                  base - (1 + n) * log_q, log_z - log_z_dual, base + (1 - n) * log_q)
    else:
        report = InequalityReport("fk_duality_swapped", {"p": p, "p_star": ps, "q": q, "n": n},
                                  -base + (n - 1) * log_q, log_z_dual - log_z, -base + (n + 1) * log_q)
    if not report.ok:
        logging.warning(f"{report.name} violated: {report.to_dict()}")
    return report


def potts_duality_check(t: EmbeddedGraph, beta: float, q: int,
                        budget: int = SPIN_BUDGET) -> InequalityReport:
    """Z_P(beta, q, t) / Z_P(beta*, q, t*) between (e^beta - 1)^{3n/2} q^{-1-n} and (e^beta - 1)^{3n/2} q^{1-n}."""
    beta_star = dual_beta(beta, q)
    n = _n_of(t)
    log_z = potts_partition_exact(t, q, budget).log_evaluate(beta)
    log_z_dual = potts_partition_exact(dualize(t), q, budget).log_evaluate(beta_star)
    base = 1.5 * n * math.log(math.expm1(beta))
    log_q = math.log(q)
    report = InequalityReport("potts_duality", {"beta": beta, "beta_star": beta_star, "q": q, "n": n},
                              base - (1 + n) * log_q, log_z - log_z_dual, base + (1 - n) * log_q)
    if not report.ok:
        logging.warning(f"potts duality violated: {report.to_dict()}")
    return report


def es_transport_discrepancy(t: EmbeddedGraph, beta: float, q: int, spin_budget: int = SPIN_BUDGET,
                             bond_budget: int = BOND_EDGE_BUDGET) -> float:
    """
    Largest gap between the Potts duality report and the FK report at p = 1 - e^{-beta} carried
    over by Z_P = e^{beta |E|} Z_FK. Both sides have |E| = 3n/2 edges, so the transport adds
    (3n/2)(beta - beta*) to every log entry.
    """
    potts = potts_duality_check(t, beta, q, spin_budget)
    fk = fk_duality_check(t, p_from_beta(beta), q, budget=bond_budget)
    shift = t.num_edges * (beta - potts.params["beta_star"])
    return max(abs(potts.log_lower - fk.log_lower - shift),
               abs(potts.log_value - fk.log_value - shift),
               abs(potts.log_upper - fk.log_upper - shift))


@lru_cache(maxsize=32)
def _triangulation_polynomials(N: int, K: int, q: int) -> Tuple[Tuple[int, PartitionPolynomial, PartitionPolynomial], ...]:
    out = []
    for t in enumerate_triangulations(N, K):
        out.append((_n_of(t), potts_partition_exact(t, q), potts_partition_exact(dualize(t), q)))
    logging.info(f"cached {len(out)} primal/dual partition polynomials for N={N} K={K} q={q}")
    return tuple(out)


def log_xi_truncated(N: int, K: int, beta: float, mu: float, q: int, side: str = PRIMAL) -> float:
    """
    ln of the annealed partition function summed over triangulations with all widths <= K:
    primal sum_t e^{-mu n(t)} Z_P(beta, q, t); dual the same with Z_P(beta, q, t*).
    """
    polys = _triangulation_polynomials(N, K, int(q))
    idx = 1 if side == PRIMAL else 2
    return log_sum_exp(-mu * item[0] + item[idx].log_evaluate(beta) for item in polys)


def annealed_duality_check(N: int, K: int, beta: float, mu: float, q: int) -> InequalityReport:
    """(1/q) Xi*_N(beta*, mu*) <= Xi_N(beta, mu) <= q Xi*_N(beta*, mu*) on the truncated sums."""
    star = dual_point(CoupledParams(beta, mu, q, PRIMAL))
    log_xi = log_xi_truncated(N, K, beta, mu, q, PRIMAL)
    log_xi_star = log_xi_truncated(N, K, star.beta, star.mu, q, DUAL)
    log_q = math.log(q)
    report = InequalityReport(
        "annealed_duality",
        {"N": N, "K": K, "beta": beta, "mu": mu, "beta_star": star.beta, "mu_star": star.mu, "q": q},
        -log_q, log_xi - log_xi_star, log_q,
        note="sums truncated to widths <= K; the per-triangulation inequality makes every common sub-sum obey the bound",
    )
    logging.info(f"annealed duality N={N} K={K} beta={beta} mu={mu}: gap {report.log_value:.6g} vs ln q {log_q:.6g}")
    return report
