"""Feature extraction and dataset handling for the band-mapping network.

A complex channel vector of length L becomes a real feature vector of length
2L by stacking the real parts first and the imaginary parts second. Features
are scaled per dimension into [0, 1] using extrema estimated on training data
only; transforming unseen data never clamps, so values outside the training
range land outside [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted


def realize(values) -> np.ndarray:
    """[Re(h), Im(h)] stacked along the last axis: (..., L) complex -> (..., 2L)."""
    arr = np.asarray(values)
    if arr.shape == () or arr.shape[-1] == 0:
        raise ValueError("cannot realize an empty channel vector")
    return np.concatenate([arr.real, arr.imag], axis=-1).astype(np.float64)


def unrealize(features) -> np.ndarray:
    """Inverse of realize: (..., 2L) real -> (..., L) complex."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.shape[-1] % 2 != 0:
        raise ValueError(f"feature dimension must be even, got {arr.shape[-1]}")
    half = arr.shape[-1] // 2
    return arr[..., :half] + 1j * arr[..., half:]


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Per-dimension affine map onto [0, 1] from training extrema, unclamped.

    Parameters
    ----------
    band : str or None
        Optional tag naming which duplex band the normalizer belongs to.
    """

    def __init__(self, band: str | None = None):
        self.band = band

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 samples to estimate extrema")
        mins = X.min(axis=0)
        maxs = X.max(axis=0)
        degenerate = np.flatnonzero(maxs == mins)
        if degenerate.size:
            raise ValueError(
                f"dimension {int(degenerate[0])} is constant on the training data; "
                "min-max scaling is undefined")
        self.n_features_in_ = X.shape[1]
        self.data_min_ = mins
        self.data_max_ = maxs
        self.scale_ = maxs - mins
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        self._check_width(X)
        return (X - self.data_min_) / self.scale_

    def inverse_transform(self, X) -> np.ndarray:
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        self._check_width(X)
        return X * self.scale_ + self.data_min_

    def _check_width(self, X) -> None:
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")

    def to_dict(self) -> dict:
        check_is_fitted(self, "data_min_")
        return {
            "band": self.band,
            "data_min": self.data_min_.tolist(),
            "data_max": self.data_max_.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MinMaxNormalizer":
        norm = cls(band=data.get("band"))
        mins = np.asarray(data["data_min"], dtype=np.float64)
        maxs = np.asarray(data["data_max"], dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("data_min/data_max must be 1-D and the same length")
        if np.any(maxs <= mins):
            raise ValueError("stored extrema must satisfy max > min per dimension")
        norm.n_features_in_ = mins.size
        norm.data_min_ = mins
        norm.data_max_ = maxs
        norm.scale_ = maxs - mins
        return norm


@dataclass
class Dataset:
    """Aligned per-position feature pairs for the two duplex bands.

    band1/band2 hold realized (or normalized) features of shape (N, 2L);
    provenance tags where the rows came from ("clean", "snr:<db>", "mixed",
    or free-form for file-loaded data).
    """

    band1: np.ndarray
    band2: np.ndarray
    position_ids: np.ndarray
    provenance: str = "clean"

    def __post_init__(self):
        self.band1 = np.asarray(self.band1, dtype=np.float64)
        self.band2 = np.asarray(self.band2, dtype=np.float64)
        self.position_ids = np.asarray(self.position_ids, dtype=np.uint64)
        if self.band1.ndim != 2 or self.band2.ndim != 2:
            raise ValueError("feature arrays must be 2-D (n_samples, n_features)")
        if self.band1.shape != self.band2.shape:
            raise ValueError(
                f"band shapes differ: {self.band1.shape} vs {self.band2.shape}")
        if self.position_ids.shape != (self.band1.shape[0],):
            raise ValueError("position_ids must have one entry per row")
        if not (np.all(np.isfinite(self.band1)) and np.all(np.isfinite(self.band2))):
            raise ValueError("features must be finite")

    def __len__(self) -> int:
        return self.band1.shape[0]

    @property
    def n_features(self) -> int:
        return self.band1.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(band1=self.band1[idx], band2=self.band2[idx],
                       position_ids=self.position_ids[idx],
                       provenance=self.provenance)


def realized_dataset(position_ids, h1, h2, provenance: str = "clean") -> Dataset:
    """Bundle raw dual-band channel matrices into a realized feature dataset."""
    return Dataset(band1=realize(h1), band2=realize(h2),
                   position_ids=position_ids, provenance=provenance)


def split_dataset(dataset: Dataset, train_fraction: float,
                  rng: np.random.Generator):
    """Seeded row split into (train, test), disjoint by position id.

    Requires unique position ids so the disjointness guarantee is real;
    noisy copies of the same positions must be mixed in after splitting.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if np.unique(dataset.position_ids).size != len(dataset):
        raise ValueError("position ids must be unique before splitting")
    n = len(dataset)
    n_train = int(np.floor(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} rows at {train_fraction} leaves one side empty")
    order = rng.permutation(n)
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])


def mix_datasets(clean: Dataset, noisy: Dataset, n_noisy: int, n_clean: int,
                 rng: np.random.Generator) -> Dataset:
    """Seeded mixture of rows drawn without replacement from two sources."""
    if clean.n_features != noisy.n_features:
        raise ValueError("datasets must share the feature dimension to mix")
    if n_clean > len(clean):
        raise ValueError(f"requested {n_clean} clean rows, only {len(clean)} available")
    if n_noisy > len(noisy):
        raise ValueError(f"requested {n_noisy} noisy rows, only {len(noisy)} available")
    if n_clean < 0 or n_noisy < 0 or n_clean + n_noisy == 0:
        raise ValueError("mixture must request a positive number of rows")
    pick_clean = rng.choice(len(clean), size=n_clean, replace=False)
    pick_noisy = rng.choice(len(noisy), size=n_noisy, replace=False)
    band1 = np.concatenate([clean.band1[pick_clean], noisy.band1[pick_noisy]])
    band2 = np.concatenate([clean.band2[pick_clean], noisy.band2[pick_noisy]])
    ids = np.concatenate([clean.position_ids[pick_clean],
                          noisy.position_ids[pick_noisy]])
    order = rng.permutation(n_clean + n_noisy)
    return Dataset(band1=band1[order], band2=band2[order],
                   position_ids=ids[order], provenance="mixed")


def normalize_dataset(dataset: Dataset, norm1: MinMaxNormalizer,
                      norm2: MinMaxNormalizer) -> Dataset:
    """Apply per-band fitted normalizers; provenance is preserved."""
    return Dataset(band1=norm1.transform(dataset.band1),
                   band2=norm2.transform(dataset.band2),
                   position_ids=dataset.position_ids,
                   provenance=dataset.provenance)


def fit_normalizers(train: Dataset):
    """Fit one normalizer per band on training rows only."""
    norm1 = MinMaxNormalizer(band="band1").fit(train.band1)
    norm2 = MinMaxNormalizer(band="band2").fit(train.band2)
    return norm1, norm2
