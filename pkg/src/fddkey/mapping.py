"""Estimator wrapper exposing the band-feature mapping as fit/predict.

BandMappingNetwork is the user-facing face of the from-scratch network in
network.py: construction stores hyperparameters, fit() trains on normalized
band-1 -> band-2 feature pairs, predict() runs the forward pass. The class
follows the scikit-learn estimator contract so it composes with clone(),
get_params/set_params, and pipeline tooling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .features import Dataset
from .metrics import nmse
from .network import (
    ArchSpec,
    NetworkParams,
    TrainConfig,
    count_flops,
    count_params,
    forward,
    preset_arch,
    train,
)


class BandMappingNetwork(RegressorMixin, BaseEstimator):
    """Feedforward regressor predicting band-2 features from band-1 features.

    Parameters
    ----------
    preset : str
        Named hidden stack ("relu4", "tanh3", "relu3"); ignored when
        hidden_sizes is given explicitly.
    hidden_sizes : tuple of int or None
        Explicit hidden widths; overrides the preset when not None.
    hidden_activation, output_activation : str
        Activation names, only consulted alongside hidden_sizes.
    epochs, batch_size, learning_rate, seed
        Training-loop settings passed through to the optimizer.
    """

    def __init__(self, preset: str = "relu4", hidden_sizes=None,
                 hidden_activation: str = "relu",
                 output_activation: str = "sigmoid",
                 epochs: int = 500, batch_size: int = 128,
                 learning_rate: float = 1e-3, seed: int = 0):
        self.preset = preset
        self.hidden_sizes = hidden_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def _build_arch(self, feature_dim: int) -> ArchSpec:
        if self.hidden_sizes is not None:
            sizes = (feature_dim, *tuple(int(s) for s in self.hidden_sizes),
                     feature_dim)
            return ArchSpec(layer_sizes=sizes,
                            hidden_activation=self.hidden_activation,
                            output_activation=self.output_activation)
        return preset_arch(self.preset, feature_dim)

    def fit(self, X, y, eval_set=None):
        """Train from scratch on aligned feature pairs.

        eval_set may be a (X_eval, y_eval) tuple; when omitted the training
        pairs double as the evaluation set for the per-epoch NMSE trace.
        """
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        if X.shape != y.shape:
            raise ValueError(
                f"band-1 and band-2 features must align, got {X.shape} vs {y.shape}")
        train_set = Dataset(band1=X, band2=y,
                            position_ids=np.arange(X.shape[0], dtype=np.uint64))
        if eval_set is None:
            eval_data = train_set
        else:
            xe = check_array(eval_set[0], dtype=np.float64)
            ye = check_array(eval_set[1], dtype=np.float64)
            eval_data = Dataset(band1=xe, band2=ye,
                                position_ids=np.arange(xe.shape[0], dtype=np.uint64))
        arch = self._build_arch(X.shape[1])
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                          seed=self.seed, learning_rate=self.learning_rate)
        params, trace = train(arch, train_set, cfg, eval_data)
        self.n_features_in_ = X.shape[1]
        self.arch_ = arch
        self.params_ = params
        self.trace_ = trace
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.params_, X)

    def eval_nmse(self, X, y) -> float:
        """NMSE of the mapped features against ground truth."""
        return nmse(self.predict(X), np.asarray(y, dtype=np.float64))

    @property
    def n_parameters_(self) -> int:
        check_is_fitted(self, "arch_")
        return count_params(self.arch_)

    @property
    def n_flops_(self) -> int:
        check_is_fitted(self, "arch_")
        return count_flops(self.arch_)

    @classmethod
    def from_params(cls, params: NetworkParams) -> "BandMappingNetwork":
        """Wrap already-trained parameters (e.g. a loaded checkpoint)."""
        arch = params.arch
        est = cls(preset="relu4", hidden_sizes=arch.layer_sizes[1:-1],
                  hidden_activation=arch.hidden_activation,
                  output_activation=arch.output_activation)
        est.n_features_in_ = arch.layer_sizes[0]
        est.arch_ = arch
        est.params_ = params
        est.trace_ = []
        return est
