"""Key-quality and prediction-quality metrics.

All vector norms are Euclidean. nmse averages per-sample relative errors,
nvd is its single-pair form (asymmetric: normalized by its second argument),
ker is the bit error fraction of two equal-length keys, and kgr counts key
bits per channel use (per subcarrier).
"""
from __future__ import annotations

import numpy as np


def nmse(pred, truth) -> float:
    """Mean over samples of ||pred - truth||^2 / ||truth||^2."""
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    t = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    denom = np.sum(t * t, axis=1)
    if np.any(denom == 0.0):
        raise ValueError("truth row with zero norm; relative error undefined")
    num = np.sum((p - t) ** 2, axis=1)
    return float(np.mean(num / denom))


def nvd(k1, k2) -> float:
    """||k1 - k2||^2 / ||k2||^2 for a single pair; normalized by k2."""
    a = np.asarray(k1, dtype=np.float64).ravel()
    b = np.asarray(k2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    denom = float(np.dot(b, b))
    if denom == 0.0:
        raise ValueError("reference vector has zero norm")
    diff = a - b
    return float(np.dot(diff, diff)) / denom


def ker(bits_a, bits_b) -> float:
    """Hamming distance over length for two equal-length bit arrays."""
    a = np.asarray(bits_a).ravel()
    b = np.asarray(bits_b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"key lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty keys have no error rate")
    return float(np.count_nonzero(a != b)) / a.size


def kgr(bits, n_subcarriers: int) -> float:
    """Key bits per subcarrier of one measured band."""
    if n_subcarriers < 1:
        raise ValueError(f"n_subcarriers must be positive, got {n_subcarriers}")
    n_bits = np.asarray(bits).size
    return n_bits / n_subcarriers
