"""
Pure-CDT transfer matrix.

u(n, n') = binom(n + n' - 1, n - 1) e^{-mu (n + n')} is the weight of one strip with lower width
n and upper width n' summed over its rooted words; Z_N(mu) = tr U^N. Everything here works with
the K x K truncation and in the log domain, since entries span hundreds of orders of magnitude at
K ~ 200.
"""

import itertools
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import ARTIFACTS_DIR, MU_CRITICAL, POWER_ITER_MAX, POWER_ITER_TOL
from src.ct_core import WidthSequence
from src.exception import CustomException, DomainError
from src.logger import logging
from src.utils import save_table

GAP_COLUMNS = ["N", "K", "mu", "log_ZN", "log_lambda", "gap"]


def _check_real(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def _check_positive_int(name: str, value: int) -> int:
    if int(value) != value or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def log_u(n: int, n_prime: int, mu: float) -> float:
    return math.log(math.comb(n + n_prime - 1, n - 1)) - mu * (n + n_prime)


@dataclass(frozen=True)
class TransferMatrix:
    mu: float
    K: int
    log_entries: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, mu: float, K: int) -> "TransferMatrix":
        mu = _check_real("mu", mu)
        K = _check_positive_int("K", K)
        logs = np.empty((K, K))
        for n in range(1, K + 1):
            for n_prime in range(1, K + 1):
                logs[n - 1, n_prime - 1] = log_u(n, n_prime, mu)
        logs.setflags(write=False)
        return cls(mu, K, logs)

    @property
    def entries(self) -> np.ndarray:
        return np.exp(self.log_entries)

    def scaled(self, K: Optional[int] = None) -> Tuple[np.ndarray, float]:
        """Leading K x K block divided by its largest entry, with the log of that entry."""
        K = self.K if K is None else K
        block = self.log_entries[:K, :K]
        shift = float(block.max())
        return np.exp(block - shift), shift

    def log_weight(self, widths: Sequence[int]) -> float:
        N = len(widths)
        return sum(float(self.log_entries[widths[i] - 1, widths[(i + 1) % N] - 1]) for i in range(N))


def lambda_closed_form(mu: float) -> float:
    """Lambda(mu) = [(1 - sqrt(1 - 4 e^{-2 mu})) / (2 e^{-mu})]^2, defined for mu >= ln 2."""
    mu = _check_real("mu", mu)
    if mu < MU_CRITICAL:
        raise DomainError(f"Λ undefined below ln 2 (mu={mu})")
    x = math.exp(-mu)
    disc = max(0.0, 1.0 - 4.0 * x * x)
    # rationalized form, no cancellation for large mu
    return (2.0 * x / (1.0 + math.sqrt(disc))) ** 2


def lambda_curve(mus: Sequence[float]) -> np.ndarray:
    return np.array([lambda_closed_form(mu) for mu in mus])


def _log_matrix_power(scaled: np.ndarray, shift: float, power: int) -> Tuple[np.ndarray, float]:
    """(A, s) with U^power = A e^s, by binary exponentiation with renormalization."""
    size = scaled.shape[0]
    result, result_log = np.eye(size), 0.0
    base, base_log = scaled.copy(), shift
    while power:
        if power & 1:
            result = result @ base
            result_log += base_log
            m = result.max()
            result /= m
            result_log += math.log(m)
        power >>= 1
        if power:
            base = base @ base
            base_log *= 2
            m = base.max()
            base /= m
            base_log += math.log(m)
    return result, result_log


def z_n_truncated(N: int, mu: float, K: int, matrix: Optional[TransferMatrix] = None) -> float:
    """ln tr U_K^N, summed over all width sequences with every width <= K."""
    N = _check_positive_int("N", N)
    K = _check_positive_int("K", K)
    mu = _check_real("mu", mu)
    tm = matrix if matrix is not None and matrix.mu == mu and matrix.K >= K else TransferMatrix.build(mu, K)
    scaled, shift = tm.scaled(K)
    power, log_scale = _log_matrix_power(scaled, shift, N)
    return math.log(np.trace(power)) + log_scale


def leading_eigenpair(matrix: TransferMatrix, tol: float = POWER_ITER_TOL,
                      max_iter: int = POWER_ITER_MAX) -> Tuple[float, np.ndarray]:
    """Perron eigenvalue and positive unit eigenvector of the truncated U by power iteration."""
    scaled, shift = matrix.scaled()
    v = np.full(matrix.K, 1.0 / math.sqrt(matrix.K))
    estimate = 0.0
    for iteration in range(1, max_iter + 1):
        w = scaled @ v
        norm = float(np.linalg.norm(w))
        w /= norm
        if abs(norm - estimate) <= tol * norm:
            logging.info(f"power iteration converged after {iteration} steps (mu={matrix.mu}, K={matrix.K})")
            return norm * math.exp(shift), w
        estimate, v = norm, w
    logging.warning(f"power iteration hit {max_iter} steps without reaching tol={tol}")
    return estimate * math.exp(shift), v


def _log_increments(matrix: TransferMatrix, N: int, K_values: Sequence[int]) -> Dict[int, float]:
    """
    ln(Z_N^{(K)} - Z_N^{(K-1)}) for each K, summed directly over the cyclic width sequences that
    visit width K, split by the first position holding K. No subtraction of nearly equal traces.
    """
    out = {}
    for K in K_values:
        scaled, shift = matrix.scaled(K)
        k = K - 1
        if K == 1:
            out[K] = z_n_truncated(N, matrix.mu, 1, matrix)
            continue
        keep = np.ones(K)
        keep[k] = 0.0

        # rows[m] = e_K^T U^m, each rescaled
        rows: List[Tuple[np.ndarray, float]] = []
        r, r_log = np.zeros(K), 0.0
        r[k] = 1.0
        rows.append((r, r_log))
        for _ in range(N):
            r = r @ scaled
            m = r.max()
            r = r / m
            r_log += math.log(m) + shift
            rows.append((r, r_log))

        terms = [math.log(rows[N][0][k]) + rows[N][1]]
        c = keep * scaled[:, k]
        c_log = shift
        for i in range(1, N):
            row, row_log = rows[N - i]
            val = float(row @ c)
            if val > 0.0:
                terms.append(math.log(val) + row_log + c_log)
            c = keep * (scaled @ c)
            m = c.max()
            if m <= 0.0:
                break
            c /= m
            c_log += math.log(m) + shift
        top = max(terms)
        out[K] = top + math.log(sum(math.exp(t - top) for t in terms))
    return out


@dataclass
class DivergenceReport:
    N: int
    mu: float
    K_max: int
    verdict: str
    threshold: float
    exact_boundary: float
    analytic_verdict: str
    ratio: float
    increments: List[Tuple[int, float]]

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "mu": self.mu,
            "K_max": self.K_max,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "exact_boundary": self.exact_boundary,
            "analytic_verdict": self.analytic_verdict,
            "ratio": self.ratio,
            "increments": [{"K": K, "log_increment": v} for K, v in self.increments],
        }


def cylinder_threshold(N: int) -> float:
    c = 2.0 * math.cos(math.pi / (N + 1))
    return math.log(c) if c > 1e-12 else -math.inf


def divergence_diagnostic(N: int, mu: float, K_max: int) -> DivergenceReport:
    """
    Increment-trend verdict for Z_N(mu) as K grows.

    "diverging" when the increments never decrease over the top half of K <= K_max, otherwise
    "converging" if their geometric ratio over that window is below 1. The report also carries
    the necessary-condition threshold ln(2 cos(pi/(N+1))) and the exact boundary ln 2.
    """
    N = _check_positive_int("N", N)
    mu = _check_real("mu", mu)
    if K_max < 8:
        raise DomainError(f"divergence diagnostic needs K_max >= 8, got {K_max}")
    matrix = TransferMatrix.build(mu, K_max)
    incs = _log_increments(matrix, N, range(1, K_max + 1))
    lo = K_max // 2
    window = [incs[K] for K in range(lo, K_max + 1)]
    steps = np.diff(window)
    ratio = math.exp((window[-1] - window[0]) / (K_max - lo))
    if np.all(steps >= 0.0) or ratio >= 1.0:
        verdict = "diverging"
    else:
        verdict = "converging"
    analytic = "diverging" if mu < MU_CRITICAL else "converging"
    logging.info(f"divergence diagnostic N={N} mu={mu} K_max={K_max}: {verdict} (ratio={ratio:.4g}, analytic={analytic})")
    return DivergenceReport(
        N=N,
        mu=mu,
        K_max=K_max,
        verdict=verdict,
        threshold=cylinder_threshold(N),
        exact_boundary=MU_CRITICAL,
        analytic_verdict=analytic,
        ratio=ratio,
        increments=sorted(incs.items()),
    )


class PureGibbsWidthLaw:
    """
    Exact law of the width sequence under the truncated N-strip pure-CDT Gibbs measure:
    P(n^0, ..., n^{N-1}) = prod_i u(n^i, n^{i+1}) / tr U_K^N.

    Sampling goes forward from n^0 ~ (U^N)_{aa} / tr U^N; the conditional of the next width given
    the current width b and the start a is u(b, c) (U^{m-1})_{ca} / (U^m)_{ba}.
    """

    def __init__(self, N: int, mu: float, K: int):
        self.N = _check_positive_int("N", N)
        self.mu = _check_real("mu", mu)
        self.K = _check_positive_int("K", K)
        self.matrix = TransferMatrix.build(mu, K)
        scaled, shift = self.matrix.scaled()
        self._scaled = scaled
        # powers[m] = U^m up to a positive scale
        powers = [np.eye(K)]
        for _ in range(N):
            nxt = powers[-1] @ scaled
            powers.append(nxt / nxt.max())
        self._powers = powers
        diag = np.diag(powers[N]).copy()
        self.start_probabilities = diag / diag.sum()
        self.log_partition = z_n_truncated(N, mu, K, self.matrix)

    def probability(self, widths: Sequence[int]) -> float:
        if len(widths) != self.N or any(not 1 <= n <= self.K for n in widths):
            return 0.0
        return math.exp(self.matrix.log_weight(widths) - self.log_partition)

    def conditional(self, start: int, current: int, remaining: int) -> np.ndarray:
        """Distribution of the next width (0-based) given start a, current b and m remaining steps."""
        weights = self._scaled[current, :] * self._powers[remaining - 1][:, start]
        return weights / weights.sum()

    def table(self) -> Dict[Tuple[int, ...], float]:
        """Every support point with its probability (desk scale only)."""
        return {w: self.probability(w) for w in itertools.product(range(1, self.K + 1), repeat=self.N)}


def sample_widths(law: PureGibbsWidthLaw, seed) -> WidthSequence:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    start = int(rng.choice(law.K, p=law.start_probabilities))
    widths = [start]
    current = start
    for j in range(1, law.N):
        probs = law.conditional(start, current, law.N - j)
        current = int(rng.choice(law.K, p=probs))
        widths.append(current)
    return WidthSequence(tuple(n + 1 for n in widths))


def free_energy_gap_table(mu: float, K: int, Ns: Sequence[int]) -> List[dict]:
    log_lambda = math.log(lambda_closed_form(mu))
    matrix = TransferMatrix.build(mu, K)
    rows = []
    for N in Ns:
        log_zn = z_n_truncated(N, mu, K, matrix)
        rows.append({
            "N": N,
            "K": K,
            "mu": mu,
            "log_ZN": log_zn,
            "log_lambda": log_lambda,
            "gap": abs(log_zn / N - log_lambda),
        })
    return rows


@dataclass
class TransferScanConfig:
    table_path: str = os.path.join(ARTIFACTS_DIR, "transfer_gap.csv")


class TransferScan:
    def __init__(self, config: Optional[TransferScanConfig] = None):
        self.scan_config = config or TransferScanConfig()

    def initiate_transfer_scan(self, mus: Sequence[float], K: int, Ns: Sequence[int]):
        logging.info(f"transfer scan mus={list(mus)} K={K} Ns={list(Ns)}")
        try:
            rows = []
            for mu in mus:
                rows.extend(free_energy_gap_table(mu, K, Ns))
            frame = save_table(self.scan_config.table_path, rows, GAP_COLUMNS)
            logging.info(f"transfer scan written to {self.scan_config.table_path}")
            return frame
        except CustomException:
            raise
        except Exception as e:
            raise CustomException(e, sys)
