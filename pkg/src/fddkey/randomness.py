"""Statistical randomness suite for fixed-size key blocks.

Eight classical bit-stream tests, parameterized for short blocks (128 bits by
default): Frequency, Block Frequency, Runs, Cumulative Sums (both
directions), Discrete Fourier Transform, binary matrix Ranking, Approximate
Entropy, and Serial. Each per-block test returns its p-value(s); the suite
runner aggregates pass ratios at a significance level over many blocks.

Parameter choices are sized to the block length: 16-bit sub-blocks for Block
Frequency, 8x8 matrices for Ranking, m=2 for Approximate Entropy, m=4 for
Serial. A configuration whose minimum supported length exceeds the actual
block length is reported as not applicable rather than silently run.

The Fourier test evaluates the transform directly from precomputed cosine
and sine matrices; block lengths stay small, so the O(n^2) product is cheap
and has no FFT dependency.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._special import igamc, std_normal_cdf

BLOCK_BITS = 128
DEFAULT_ALPHA = 0.01


@dataclass(frozen=True)
class SuiteParams:
    """Per-test parameters; defaults target 128-bit blocks."""

    block_frequency_block: int = 16
    approx_entropy_m: int = 2
    serial_m: int = 4
    rank_size: int = 8

    def __post_init__(self):
        if self.block_frequency_block < 2:
            raise ValueError("block_frequency_block must be at least 2")
        if self.approx_entropy_m < 1:
            raise ValueError("approx_entropy_m must be at least 1")
        if self.serial_m < 2:
            raise ValueError("serial_m must be at least 2")
        if self.rank_size < 2:
            raise ValueError("rank_size must be at least 2")


def _as_bits(block) -> np.ndarray:
    bits = np.asarray(block)
    if bits.ndim != 1 or bits.size < 2:
        raise ValueError("a block must be a 1-D array of at least 2 bits")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("blocks must contain only 0 and 1")
    return bits.astype(np.uint8)


def frequency_test(block) -> float:
    """Monobit balance of +/-1 recoded bits."""
    bits = _as_bits(block)
    n = bits.size
    s = 2.0 * float(np.sum(bits)) - n
    return math.erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0))


def block_frequency_test(block, block_size: int = 16) -> float:
    """Chi-square of per-sub-block one-proportions against 1/2."""
    bits = _as_bits(block)
    n_sub = bits.size // block_size
    if n_sub < 1:
        raise ValueError(
            f"block of {bits.size} bits holds no sub-block of {block_size}")
    pis = bits[:n_sub * block_size].reshape(n_sub, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((pis - 0.5) ** 2))
    return igamc(n_sub / 2.0, chi2 / 2.0)


def runs_test(block) -> float:
    """Total run count against its expectation under the observed bias.

    Returns 0.0 when the frequency prerequisite |pi - 1/2| >= 2/sqrt(n)
    fails, per the reference procedure.
    """
    bits = _as_bits(block)
    n = bits.size
    pi = float(np.mean(bits))
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return math.erfc(num / den)


def _cusum_p(partial_sums: np.ndarray) -> float:
    n = partial_sums.size
    z = int(np.max(np.abs(partial_sums)))
    sqrt_n = math.sqrt(n)
    total = 1.0
    for k in range(math.floor((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1):
        total -= (std_normal_cdf((4 * k + 1) * z / sqrt_n)
                  - std_normal_cdf((4 * k - 1) * z / sqrt_n))
    for k in range(math.floor((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1):
        total += (std_normal_cdf((4 * k + 3) * z / sqrt_n)
                  - std_normal_cdf((4 * k + 1) * z / sqrt_n))
    return min(max(total, 0.0), 1.0)


def cumulative_sums_test(block) -> tuple[float, float]:
    """Maximum random-walk excursion, forward and backward; both p-values."""
    bits = _as_bits(block)
    x = 2 * bits.astype(np.int64) - 1
    return _cusum_p(np.cumsum(x)), _cusum_p(np.cumsum(x[::-1]))


_DFT_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _dft_matrices(n: int):
    if n not in _DFT_CACHE:
        ang = 2.0 * np.pi * np.outer(np.arange(n // 2), np.arange(n)) / n
        _DFT_CACHE[n] = (np.cos(ang), np.sin(ang))
    return _DFT_CACHE[n]


def dft_test(block) -> float:
    """Fraction of low-frequency peaks under the 95% threshold."""
    bits = _as_bits(block)
    n = bits.size
    x = 2.0 * bits.astype(np.float64) - 1.0
    cos_m, sin_m = _dft_matrices(n)
    moduli = np.hypot(cos_m @ x, sin_m @ x)
    threshold = math.sqrt(n * math.log(1.0 / 0.05))
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(moduli < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return math.erfc(abs(d) / math.sqrt(2.0))


def rank_probabilities(size: int) -> tuple[float, float, float]:
    """(P[rank=q], P[rank=q-1], P[rank<=q-2]) for a random q x q GF(2) matrix."""

    def p_rank(r: int) -> float:
        exponent = r * (2 * size - r) - size * size
        prod = 1.0
        for i in range(r):
            prod *= (1.0 - 2.0 ** (i - size)) ** 2 / (1.0 - 2.0 ** (i - r))
        return 2.0 ** exponent * prod

    p_full = p_rank(size)
    p_minus = p_rank(size - 1)
    return p_full, p_minus, 1.0 - p_full - p_minus


def _gf2_rank(rows: list[int]) -> int:
    pivots: dict[int, int] = {}
    rank = 0
    for row in rows:
        cur = row
        while cur:
            lead = cur.bit_length() - 1
            if lead in pivots:
                cur ^= pivots[lead]
            else:
                pivots[lead] = cur
                rank += 1
                break
    return rank


def rank_test(block, matrix_size: int = 8) -> float:
    """Rank distribution of disjoint q x q binary matrices."""
    bits = _as_bits(block)
    q = matrix_size
    n_matrices = bits.size // (q * q)
    if n_matrices < 1:
        raise ValueError(
            f"block of {bits.size} bits holds no {q}x{q} matrix")
    weights = 1 << np.arange(q - 1, -1, -1)
    counts = [0, 0, 0]
    for i in range(n_matrices):
        chunk = bits[i * q * q:(i + 1) * q * q].reshape(q, q)
        rows = [int(row @ weights) for row in chunk]
        r = _gf2_rank(rows)
        counts[0 if r == q else (1 if r == q - 1 else 2)] += 1
    probs = np.array(rank_probabilities(q))
    expected = n_matrices * probs
    chi2 = float(np.sum((np.array(counts) - expected) ** 2 / expected))
    return igamc(1.0, chi2 / 2.0)


def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Overlapping m-bit pattern counts with wraparound; n windows total."""
    if m == 0:
        return np.array([bits.size], dtype=np.int64)
    ext = np.concatenate([bits, bits[:m - 1]])
    windows = np.lib.stride_tricks.sliding_window_view(ext, m)
    powers = (1 << np.arange(m - 1, -1, -1)).astype(np.int64)
    values = windows @ powers
    return np.bincount(values, minlength=2 ** m)


def approximate_entropy_test(block, m: int = 2) -> float:
    """Entropy gap between m- and (m+1)-bit pattern statistics."""
    bits = _as_bits(block)
    n = bits.size

    def phi(mm: int) -> float:
        counts = _pattern_counts(bits, mm)
        c = counts[counts > 0] / n
        return float(np.sum(c * np.log(c)))

    apen = phi(m) - phi(m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return igamc(2.0 ** (m - 1), chi2 / 2.0)


def serial_test(block, m: int = 4) -> tuple[float, float]:
    """First and second psi-square differences over overlapping m-patterns."""
    bits = _as_bits(block)
    n = bits.size
    if m < 2:
        raise ValueError("serial test needs m >= 2")

    def psi2(mm: int) -> float:
        if mm == 0:
            return 0.0
        counts = _pattern_counts(bits, mm).astype(np.float64)
        return (2.0 ** mm / n) * float(counts @ counts) - n

    base = psi2(m)
    d1 = base - psi2(m - 1)
    d2 = base - 2.0 * psi2(m - 1) + psi2(m - 2)
    p1 = igamc(2.0 ** (m - 2), d1 / 2.0)
    p2 = igamc(2.0 ** (m - 3), d2 / 2.0)
    return p1, p2


@dataclass(frozen=True)
class TestResult:
    name: str
    applicable: bool
    pass_count: int
    total: int

    @property
    def pass_ratio(self) -> float:
        return self.pass_count / self.total if self.total else 0.0


@dataclass(frozen=True)
class TestReport:
    alpha: float
    n_blocks: int
    results: tuple[TestResult, ...]

    def result(self, name: str) -> TestResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(f"no test named {name!r}")

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "blocks": self.n_blocks,
            "tests": [{
                "name": r.name,
                "applicable": r.applicable,
                "pass_count": r.pass_count,
                "total": r.total,
                "pass_ratio": round(r.pass_ratio, 6),
            } for r in self.results],
        }, indent=2)

    def to_text_table(self) -> str:
        width = max(len(r.name) for r in self.results)
        lines = [f"{'Test':<{width}}  Pass ratio",
                 f"{'-' * width}  ----------"]
        for r in self.results:
            ratio = f"{r.pass_ratio:.4f}" if r.applicable else "n/a"
            lines.append(f"{r.name:<{width}}  {ratio}")
        return "\n".join(lines)


def blockify(keys, block_bits: int = BLOCK_BITS) -> np.ndarray:
    """Concatenate variable-length keys and cut complete fixed-size blocks.

    Accepts bit arrays or '0'/'1' strings; the trailing remainder shorter
    than block_bits is discarded.
    """
    parts = []
    for key in keys:
        if isinstance(key, str):
            if key and not set(key) <= {"0", "1"}:
                raise ValueError("key strings must contain only 0 and 1")
            arr = np.frombuffer(key.encode(), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(key)
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise ValueError("key arrays must contain only 0 and 1")
            arr = arr.astype(np.uint8)
        parts.append(arr)
    stream = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint8)
    n_blocks = stream.size // block_bits
    if n_blocks == 0:
        raise ValueError(
            f"{stream.size} bits do not fill a single {block_bits}-bit block")
    return stream[:n_blocks * block_bits].reshape(n_blocks, block_bits)


def _applicability(n: int, params: SuiteParams) -> dict[str, bool]:
    return {
        "Approximate Entropy": n >= 2 ** (params.approx_entropy_m + 5),
        "Block Frequency": n >= params.block_frequency_block,
        "Cumulative Sums": True,
        "Discrete Fourier Transform": n >= 4,
        "Frequency": True,
        "Ranking": n >= params.rank_size ** 2,
        "Runs": True,
        "Serial": n >= 2 ** (params.serial_m + 3),
    }


def run_suite(blocks, alpha: float = DEFAULT_ALPHA,
              params: SuiteParams = SuiteParams()) -> TestReport:
    """Pass ratios of all eight tests over many equal-size blocks.

    A block passes a test when every p-value the test emits is >= alpha;
    multi-part tests (Cumulative Sums, Serial) must pass all parts.
    """
    blocks = np.asarray(blocks)
    if blocks.ndim != 2 or blocks.shape[0] < 1:
        raise ValueError("blocks must be a non-empty 2-D array")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = blocks.shape[1]
    applicable = _applicability(n, params)

    def all_pass(ps) -> bool:
        return all(p >= alpha for p in ps)

    runners = {
        "Approximate Entropy":
            lambda b: (approximate_entropy_test(b, params.approx_entropy_m),),
        "Block Frequency":
            lambda b: (block_frequency_test(b, params.block_frequency_block),),
        "Cumulative Sums": cumulative_sums_test,
        "Discrete Fourier Transform": lambda b: (dft_test(b),),
        "Frequency": lambda b: (frequency_test(b),),
        "Ranking": lambda b: (rank_test(b, params.rank_size),),
        "Runs": lambda b: (runs_test(b),),
        "Serial": lambda b: serial_test(b, params.serial_m),
    }
    counts = {name: 0 for name in runners}
    for row in blocks:
        bits = _as_bits(row)
        for name, runner in runners.items():
            if applicable[name] and all_pass(runner(bits)):
                counts[name] += 1
    results = tuple(
        TestResult(name=name, applicable=applicable[name],
                   pass_count=counts[name] if applicable[name] else 0,
                   total=blocks.shape[0] if applicable[name] else 0)
        for name in sorted(runners))
    return TestReport(alpha=alpha, n_blocks=blocks.shape[0], results=results)
