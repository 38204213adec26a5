"""Guard-band Gaussian quantization and key alignment.

Each party fits a Gaussian to its own feature vector, slices the real line
into K equal-probability intervals under that fit, and trims a probability
mass of guard_factor from each side of every interior boundary. Features
landing in a guard gap emit the symbol -1 and their indices are exchanged in
the clear; surviving symbols become log2(K) bits each.

Interval k spans [quantile(k/K + eps), quantile((k+1)/K - eps)) in feature
space, with the outer edges of intervals 0 and K-1 unbounded, so extreme
features always map to an edge symbol and total dropped mass is (2K-2)*eps.
Intervals are closed on the left: a feature exactly on a cut belongs to the
region whose left endpoint it is (a probability-zero case, pinned for
determinism).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._special import std_normal_quantile

VALID_LEVELS = (2, 4, 8)
ENCODINGS = ("gray", "binary")


def default_guard_factor(levels: int) -> float:
    """Guard factor that discards a total probability mass of 0.2 for any K."""
    if levels < 2:
        raise ValueError(f"levels must be at least 2, got {levels}")
    return 0.2 / (2.0 * (levels - 1))


@dataclass(frozen=True)
class QuantConfig:
    levels: int = 2
    guard_factor: float = 0.1
    encoding: str = "gray"

    def __post_init__(self):
        if self.levels not in VALID_LEVELS:
            raise ValueError(f"levels must be one of {VALID_LEVELS}, got {self.levels}")
        if not 0.0 < self.guard_factor < 1.0 / (2.0 * self.levels):
            raise ValueError(
                f"guard_factor must lie in (0, 1/(2K)) = (0, {1.0 / (2 * self.levels)}), "
                f"got {self.guard_factor}")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"encoding must be one of {ENCODINGS}, got {self.encoding}")

    @property
    def bits_per_symbol(self) -> int:
        return int(self.levels).bit_length() - 1


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma2: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def fit_gaussian(x) -> GaussianFit:
    """Sample mean and unbiased variance of one feature vector."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ValueError(f"need at least 2 features to fit, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("features must be finite")
    mu = float(np.mean(arr))
    sigma2 = float(np.sum((arr - mu) ** 2) / (arr.size - 1))
    if sigma2 == 0.0:
        raise ValueError("features are constant; Gaussian fit is degenerate")
    return GaussianFit(mu=mu, sigma2=sigma2)


def quantile(p: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    """Quantile of N(mu, sigma^2) via the refined rational approximation."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return mu + sigma * std_normal_quantile(p)


def build_intervals(fit: GaussianFit, cfg: QuantConfig) -> np.ndarray:
    """(K, 2) array of interval bounds; rows ordered, edges at -/+inf.

    Interior boundaries sit at the k/K quantiles of the fitted Gaussian,
    pulled inward by guard_factor of probability mass on each side.
    """
    k_levels = cfg.levels
    eps = cfg.guard_factor
    bounds = np.empty((k_levels, 2))
    for k in range(k_levels):
        lo = -np.inf if k == 0 else quantile(k / k_levels + eps, fit.mu, fit.sigma)
        hi = np.inf if k == k_levels - 1 else quantile((k + 1) / k_levels - eps,
                                                       fit.mu, fit.sigma)
        bounds[k] = (lo, hi)
    return bounds


def _interior_cuts(intervals: np.ndarray) -> np.ndarray:
    # Finite endpoints in line order: h_0, l_1, h_1, l_2, ..., l_{K-1}.
    cuts = np.concatenate([intervals[:-1, 1:2], intervals[1:, 0:1]], axis=1)
    return cuts.ravel()


def _symbols_for(x: np.ndarray, intervals: np.ndarray):
    """Interval index per feature, -1 in guard gaps, plus nearest-interval fallback."""
    cuts = _interior_cuts(intervals)
    region = np.searchsorted(cuts, x, side="right")
    in_interval = region % 2 == 0
    symbols = np.where(in_interval, region // 2, -1).astype(np.int16)
    # Fallback: guard features resolve to whichever adjacent interval edge is
    # closer, ties to the lower index.
    nearest = symbols.copy()
    guard = ~in_interval
    if np.any(guard):
        g_region = region[guard]
        left_edge = cuts[g_region - 1]
        right_edge = cuts[g_region]
        below = (g_region - 1) // 2
        go_up = np.abs(x[guard] - right_edge) < np.abs(x[guard] - left_edge)
        nearest[guard] = (below + go_up).astype(np.int16)
    return symbols, nearest


def encode_symbols(symbols, cfg: QuantConfig) -> np.ndarray:
    """Symbols to bits, log2(K) per symbol, most significant bit first."""
    sym = np.asarray(symbols)
    if sym.size and (sym.min() < 0 or sym.max() >= cfg.levels):
        raise ValueError("symbols must lie in [0, K) to encode")
    codes = sym.astype(np.uint8)
    if cfg.encoding == "gray":
        codes = codes ^ (codes >> 1)
    width = cfg.bits_per_symbol
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint8)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


@dataclass(frozen=True)
class KeyMaterial:
    """One party's quantization outcome for a single feature vector."""

    raw_symbols: np.ndarray  # (2L,), -1 marks guard-dropped features
    bits: np.ndarray  # own surviving symbols encoded, before index exchange
    dropped_indices: np.ndarray  # sorted positions of the -1 symbols
    nearest_symbols: np.ndarray  # guard-free resolution of every feature
    config: QuantConfig
    fit: GaussianFit

    def __post_init__(self):
        raw = np.asarray(self.raw_symbols)
        dropped = np.flatnonzero(raw < 0)
        if not np.array_equal(dropped, np.asarray(self.dropped_indices)):
            raise ValueError("dropped_indices must be exactly the -1 positions")
        expect_bits = (raw.size - dropped.size) * self.config.bits_per_symbol
        if np.asarray(self.bits).size != expect_bits:
            raise ValueError(
                f"bit count {np.asarray(self.bits).size} does not match "
                f"{expect_bits} surviving symbol bits")
        if np.asarray(self.nearest_symbols).shape != raw.shape:
            raise ValueError("nearest_symbols must align with raw_symbols")
        if np.any(np.asarray(self.nearest_symbols) < 0):
            raise ValueError("nearest_symbols must be guard-free")

    @property
    def n_features(self) -> int:
        return np.asarray(self.raw_symbols).size


def quantize(x, cfg: QuantConfig) -> KeyMaterial:
    """Fit, slice, and encode one feature vector per the guard-band scheme."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    fit = fit_gaussian(arr)
    intervals = build_intervals(fit, cfg)
    symbols, nearest = _symbols_for(arr, intervals)
    dropped = np.flatnonzero(symbols < 0)
    bits = encode_symbols(symbols[symbols >= 0], cfg)
    return KeyMaterial(raw_symbols=symbols, bits=bits, dropped_indices=dropped,
                       nearest_symbols=nearest, config=cfg, fit=fit)


def _check_compatible(a: KeyMaterial, b: KeyMaterial) -> None:
    if a.n_features != b.n_features:
        raise ValueError(
            f"feature counts differ: {a.n_features} vs {b.n_features}")
    if a.config != b.config:
        raise ValueError("parties must share the quantizer configuration")


def union_dropped(a: KeyMaterial, b: KeyMaterial) -> np.ndarray:
    """The publicly exchanged index set: either party's guard positions."""
    _check_compatible(a, b)
    return np.union1d(a.dropped_indices, b.dropped_indices)


def encode_surviving(material: KeyMaterial, union_indices) -> np.ndarray:
    """Bits for the positions a public union keeps.

    Positions where this party's own symbol fell in a guard (possible for an
    eavesdropper applying someone else's union) use the nearest-interval
    fallback, so a bit is always emitted.
    """
    union = np.asarray(union_indices, dtype=np.int64)
    keep = np.setdiff1d(np.arange(material.n_features), union)
    symbols = np.asarray(material.raw_symbols)[keep].copy()
    fallback = symbols < 0
    if np.any(fallback):
        symbols[fallback] = np.asarray(material.nearest_symbols)[keep][fallback]
    return encode_symbols(symbols, material.config)


def align_keys(a: KeyMaterial, b: KeyMaterial):
    """Drop the union of guard indices on both sides and re-encode.

    Legitimate parties only ever discard; neither may need the fallback path
    (every survivor is a real interval symbol on both sides).
    """
    union = union_dropped(a, b)
    keep = np.setdiff1d(np.arange(a.n_features), union)
    for material, name in ((a, "first"), (b, "second")):
        if np.any(np.asarray(material.raw_symbols)[keep] < 0):
            raise AssertionError(f"{name} party keeps a guard symbol; union is wrong")
    return encode_symbols(np.asarray(a.raw_symbols)[keep], a.config), \
        encode_symbols(np.asarray(b.raw_symbols)[keep], b.config)
