"""
Critical-curve machinery for the annealed Potts-CDT model.

With h = e^beta - 1 the closed forms used throughout are
    primal no-Gibbs curve   ln 2 + max(ln q / 2, (3/2) ln h)
    primal subcritical      ln 2 + (3/2) ln(q^{1/3} + h)
    dual no-Gibbs curve     ln 2 + max(ln q, (3/2) ln h*)
    dual subcritical        ln 2 + (3/2) ln(h* + q^{2/3})
A point strictly below the no-Gibbs curve is in Sigma (resp. Sigma*), strictly above the
subcritical curve it satisfies the high-temperature condition, anything else is in the band.
"""

import itertools
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import ARTIFACTS_DIR, CIRCUIT_MAX_K, MU_CRITICAL
from src.duality import DUAL, PRIMAL, CoupledParams, dual_point
from src.exception import CustomException, DomainError, StructuralError
from src.logger import logging
from src.spin_exact import fk_cluster_histogram
from src.transfer import lambda_closed_form, cylinder_threshold, z_n_truncated
from src.union_find import UnionFind
from src.utils import save_jsonl, save_table

CURVE_COLUMNS = ["beta", "lower", "upper", "asymptote", "small_beta_const"]
LN2 = math.log(2.0)


def _check(beta: float, q: float, side: str = PRIMAL) -> None:
    if math.isnan(beta) or beta <= 0.0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if math.isnan(q) or q < 2:
        raise DomainError(f"q must be >= 2, got {q}")
    if side not in (PRIMAL, DUAL):
        raise DomainError(f"side must be 'primal' or 'dual', got {side!r}")


def lower_curve(beta: float, q: float, side: str = PRIMAL) -> float:
    """Boundary of Sigma (primal) or Sigma* (dual)."""
    _check(beta, q, side)
    log_h = math.log(math.expm1(beta))
    if side == PRIMAL:
        return LN2 + max(0.5 * math.log(q), 1.5 * log_h)
    return LN2 + max(math.log(q), 1.5 * log_h)


def upper_curve(beta: float, q: float, side: str = PRIMAL) -> float:
    """Sufficient subcriticality threshold from the high-temperature expansion."""
    _check(beta, q, side)
    h = math.expm1(beta)
    if side == PRIMAL:
        return LN2 + 1.5 * math.log(q ** (1.0 / 3.0) + h)
    return LN2 + 1.5 * math.log(h + q ** (2.0 / 3.0))


def small_beta_constant(q: float, side: str = PRIMAL) -> float:
    return LN2 + (0.5 * math.log(q) if side == PRIMAL else math.log(q))


def asymptote(beta: float) -> float:
    return 1.5 * beta + LN2


@dataclass
class RegionVerdict:
    beta: float
    mu: float
    q: float
    side: str
    in_no_gibbs_region: bool
    in_subcritical_region: bool
    lower: float
    upper: float

    @property
    def band(self) -> bool:
        return not (self.in_no_gibbs_region or self.in_subcritical_region)

    def to_dict(self) -> dict:
        return {
            "point": {"beta": self.beta, "mu": self.mu, "q": self.q, "side": self.side},
            "in_no_gibbs_region": self.in_no_gibbs_region,
            "in_subcritical_region": self.in_subcritical_region,
            "band": self.band,
            "lower": self.lower,
            "upper": self.upper,
        }


def classify_point(beta: float, mu: float, q: float, side: str = PRIMAL) -> RegionVerdict:
    if math.isnan(mu):
        raise DomainError("mu is NaN")
    lo, hi = lower_curve(beta, q, side), upper_curve(beta, q, side)
    verdict = RegionVerdict(beta, mu, q, side, mu < lo, mu > hi, lo, hi)
    if verdict.in_no_gibbs_region and verdict.in_subcritical_region:
        raise StructuralError(f"point {verdict.to_dict()} is both in the no-Gibbs and the subcritical region")
    return verdict


def region_map_phi(beta: float, mu: float, q: float) -> Tuple[float, float]:
    star = dual_point(CoupledParams(beta, mu, q, PRIMAL))
    return star.beta, star.mu


def region_consistency_scan(q: float, betas: Sequence[float], mus: Sequence[float], side: str = PRIMAL) -> int:
    """Number of grid points classified in both regions; classify_point raises on the first one."""
    bad = 0
    for beta in betas:
        for mu in mus:
            v = classify_point(beta, mu, q, side)
            bad += int(v.in_no_gibbs_region and v.in_subcritical_region)
    return bad


@dataclass
class CurveTable:
    q: float
    side: str
    rows: List[dict] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])


def curve_table(q: float, side: str, betas: Sequence[float]) -> CurveTable:
    betas = list(betas)
    if not betas or any(b <= 0 for b in betas) or any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise DomainError("beta grid must be positive and strictly increasing")
    const = small_beta_constant(q, side)
    rows = []
    for beta in betas:
        lo, hi = lower_curve(beta, q, side), upper_curve(beta, q, side)
        if lo > hi:
            raise StructuralError(f"lower curve {lo} above upper curve {hi} at beta={beta}, q={q}")
        rows.append({"beta": beta, "lower": lo, "upper": hi, "asymptote": asymptote(beta), "small_beta_const": const})
    return CurveTable(q, side, rows, {
        "upper_branch": "closed form only; externally computed transfer-matrix curves are not included",
    })


def beta_grid(spec: str) -> List[float]:
    """`start:stop:count`, log-spaced."""
    try:
        start, stop, count = spec.split(":")
        return list(np.geomspace(float(start), float(stop), int(count)))
    except ValueError:
        raise DomainError(f"beta grid must look like start:stop:count, got {spec!r}")


def phi_inf(beta_star: float, q: float = 2.0) -> float:
    return lower_curve(beta_star, q, DUAL)


def phi_sup(beta_star: float, q: float = 2.0) -> float:
    return upper_curve(beta_star, q, DUAL)


def free_energy_sandwich(beta_star: float, mu_star: float, q: float = 2.0) -> dict:
    """
    ln Lambda(mu* - phi_inf + ln 2) and ln Lambda(mu* - phi_sup + ln 2), the bounds on the dual
    limiting free energy. A side whose argument falls below ln 2 is reported as None (unbounded).
    """
    out = {"beta_star": beta_star, "mu_star": mu_star, "q": q}
    for name, curve in (("lower", phi_inf), ("upper", phi_sup)):
        arg = mu_star - curve(beta_star, q) + LN2
        out[name] = math.log(lambda_closed_form(arg)) if arg >= MU_CRITICAL else None
    out["note"] = "phi_sup uses its closed-form branch only"
    return out


def no_gibbs_threshold_finite_n(N: int, beta: float, q: float) -> dict:
    c = cylinder_threshold(N)
    return {
        "N": N,
        "beta": beta,
        "q": q,
        "spin_branch": 0.5 * math.log(q) + c,
        "energy_branch": 1.5 * math.log(math.expm1(beta)) + c,
    }


def lower_bounds_zp(t, beta: float, q: float, side: str = PRIMAL) -> Tuple[float, float]:
    """
    (low-T bound, high-T bound) on ln Z_P for t (primal) or t* (dual, beta read as beta*):
    primal q h^{3n/2} and q^{n/2}; dual q h*^{3n/2} and q^n.
    """
    if side not in (PRIMAL, DUAL):
        raise DomainError(f"side must be 'primal' or 'dual', got {side!r}")
    n = t.num_faces if side == PRIMAL else t.num_vertices
    log_q = math.log(q)
    low_t = log_q + 1.5 * n * math.log(math.expm1(beta)) if beta > 0 else -math.inf
    high_t = (0.5 * n if side == PRIMAL else n) * log_q
    return low_t, high_t


def high_t_upper_bound(graph, beta: float, q: float) -> float:
    """ln of ((q+h)/q)^{|E|} q^{|V|+2/3} (1+u)^{|E|} with u = (q^{2/3} - 1) h / (q + h)."""
    h = math.expm1(beta)
    u = (q ** (2.0 / 3.0) - 1.0) * h / (q + h)
    E, V = graph.num_edges, graph.num_vertices
    return E * math.log((q + h) / q) + (V + 2.0 / 3.0) * math.log(q) + E * math.log1p(u)


def high_t_termwise_identity(graph, beta: float, q: float, hist: Optional[dict] = None) -> dict:
    """
    bound - Z_P written as sum over edge subsets A of h^{|A|} (q^{|V| - |A|/3 + 2/3} - q^{k(A)}),
    next to the direct difference of the two sides.
    """
    hist = fk_cluster_histogram(graph) if hist is None else hist
    h = math.expm1(beta)
    V = graph.num_vertices
    termwise = sum(c * h ** o * (q ** (V - o / 3.0 + 2.0 / 3.0) - q ** k) for (o, k), c in hist.items())
    zp = sum(c * h ** o * q ** k for (o, k), c in hist.items())
    direct = math.exp(high_t_upper_bound(graph, beta, q)) - zp
    return {"beta": beta, "q": q, "termwise": termwise, "direct": direct}


@dataclass
class DominationReport:
    beta: float
    q: float
    log_zp: float
    log_lower: float
    log_upper: float

    @property
    def lower_slack(self) -> float:
        return self.log_zp - self.log_lower

    @property
    def upper_slack(self) -> float:
        return self.log_upper - self.log_zp

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "q": self.q,
            "log_zp": self.log_zp,
            "log_lower": self.log_lower,
            "log_upper": self.log_upper,
            "lower_slack": self.lower_slack,
            "upper_slack": self.upper_slack,
            "lower_ok": self.lower_slack >= -1e-9,
            "upper_ok": self.upper_slack >= -1e-9,
        }


def zp_domination(t, poly, beta: float, q: float) -> DominationReport:
    report = DominationReport(beta, q, poly.log_evaluate(beta), max(lower_bounds_zp(t, beta, q)),
                              high_t_upper_bound(t, beta, q))
    logging.info(f"bound slack beta={beta} q={q}: lower {report.lower_slack:.4g}, upper {report.upper_slack:.4g}")
    return report


@dataclass
class AnnealedBound:
    log_value: float
    branches: Dict[str, float]
    shifted_mu: Dict[str, float]

    @property
    def divergent(self) -> bool:
        """True when a shifted cosmological constant sits at or below ln 2 (the untruncated sum diverges)."""
        return any(m <= MU_CRITICAL for m in self.shifted_mu.values())


def annealed_lower_bound(N: int, beta: float, mu: float, q: float, K: int) -> AnnealedBound:
    """max{q Z_N(mu - (3/2) ln h), Z_N(mu - (1/2) ln q)} with the same width truncation K."""
    shifted = {"spin": mu - 0.5 * math.log(q)}
    branches = {"spin": z_n_truncated(N, shifted["spin"], K)}
    if beta > 0.0:
        shifted["energy"] = mu - 1.5 * math.log(math.expm1(beta))
        branches["energy"] = math.log(q) + z_n_truncated(N, shifted["energy"], K)
    bound = AnnealedBound(max(branches.values()), branches, shifted)
    if bound.divergent:
        logging.warning(f"annealed lower bound at beta={beta}, mu={mu}: shifted mu at or below ln 2")
    return bound


def annealed_upper_bound(N: int, beta: float, mu: float, q: float, K: int) -> AnnealedBound:
    """q^{2/3} Z_N(mu~), mu~ = mu - (3/2) ln((q+h)/q) - (1/2) ln q - (3/2) ln(1+u)."""
    h = math.expm1(beta)
    u = (q ** (2.0 / 3.0) - 1.0) * h / (q + h)
    mu_tilde = mu - 1.5 * math.log((q + h) / q) - 0.5 * math.log(q) - 1.5 * math.log1p(u)
    value = (2.0 / 3.0) * math.log(q) + z_n_truncated(N, mu_tilde, K)
    bound = AnnealedBound(value, {"high_t": value}, {"high_t": mu_tilde})
    if bound.divergent:
        logging.warning(f"annealed upper bound at beta={beta}, mu={mu}: mu~={mu_tilde} at or below ln 2")
    return bound


def circuit_rank(num_vertices: int, edges: Sequence[Tuple[int, int]]) -> int:
    """|A| - |V(A)| + components(A) over the vertices the edges touch."""
    touched = sorted({v for e in edges for v in e})
    local = {v: i for i, v in enumerate(touched)}
    uf = UnionFind(len(touched))
    for a, b in edges:
        uf.union(local[a], local[b])
    return len(edges) - len(touched) + uf.num_components


def circuit_bound_diagnostic(graph, max_k: int = CIRCUIT_MAX_K, keep: int = 10) -> dict:
    """
    Exhaustive check of xi(A) <= (2/3)(|A| + 1) over edge subsets with |A| <= max_k.
    Violations are counted and the first `keep` are listed; they exist on every triangulation.
    """
    pairs = graph.endpoint_pairs()
    checked = violations = 0
    worst = -math.inf
    examples = []
    for size in range(1, min(max_k, len(pairs)) + 1):
        for subset in itertools.combinations(range(len(pairs)), size):
            xi = circuit_rank(graph.num_vertices, [pairs[e] for e in subset])
            excess = xi - (2.0 / 3.0) * (size + 1)
            checked += 1
            worst = max(worst, excess)
            if excess > 1e-12:
                violations += 1
                if len(examples) < keep:
                    examples.append({"edges": list(subset), "xi": xi})
    logging.info(f"circuit diagnostic: {checked} subsets, {violations} violations, max excess {worst:.3g}")
    return {"checked": checked, "violations": violations, "max_excess": worst, "examples": examples}


@dataclass
class PhaseTableConfig:
    curve_path: str = os.path.join(ARTIFACTS_DIR, "curve_table.csv")
    verdict_path: str = os.path.join(ARTIFACTS_DIR, "region_verdicts.jsonl")


class PhaseTable:
    def __init__(self, config: Optional[PhaseTableConfig] = None):
        self.phase_config = config or PhaseTableConfig()

    def initiate_phase_table(self, q: float, side: str, betas: Sequence[float],
                             points: Sequence[Tuple[float, float]] = ()):
        logging.info(f"phase table q={q} side={side} ({len(betas)} grid points, {len(points)} query points)")
        try:
            table = curve_table(q, side, betas)
            save_table(self.phase_config.curve_path, table.rows, CURVE_COLUMNS)
            verdicts = [classify_point(b, m, q, side) for b, m in points]
            if verdicts:
                save_jsonl(self.phase_config.verdict_path, [v.to_dict() for v in verdicts])
            return table, verdicts
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys)
