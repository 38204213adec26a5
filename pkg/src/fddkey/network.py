"""From-scratch feedforward network: init, forward, backprop, ADAM, training.

Everything runs in float64 numpy with explicit loops over layers; no autograd
or framework code. The loss is mean squared error averaged over both the
batch and the feature dimensions, and its gradient is what backward()
propagates, so finite differences of mse_loss are directly comparable.

Weight matrices are stored (fan_out, fan_in); a batch X of shape (V, d_in)
moves forward as X @ W.T + b.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .features import Dataset
from .metrics import nmse

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("sigmoid", "tanh")

# Preset hidden stacks, keyed by shape. Input and output width come from the
# feature dimension at construction time.
PRESETS = {
    "relu4": ((512, 1024, 1024, 512), "relu", "sigmoid"),
    "tanh3": ((512, 1024, 512), "tanh", "tanh"),
    "relu3": ((512, 1024, 512), "relu", "sigmoid"),
}


@dataclass(frozen=True)
class ArchSpec:
    """Layer widths (input, hidden..., output) plus activation choices."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[0] != sizes[-1]:
            raise ValueError(
                f"input and output width must match, got {sizes[0]} vs {sizes[-1]}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def preset_arch(name: str, feature_dim: int) -> ArchSpec:
    """Instantiate a named hidden stack for a given feature width."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    hidden, hidden_act, output_act = PRESETS[name]
    return ArchSpec(layer_sizes=(feature_dim, *hidden, feature_dim),
                    hidden_activation=hidden_act, output_activation=output_act)


@dataclass
class NetworkParams:
    """Per-layer weights (fan_out, fan_in) and biases (fan_out,), float64."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    arch: ArchSpec

    def __post_init__(self):
        sizes = self.arch.layer_sizes
        if len(self.weights) != self.arch.n_layers or len(self.biases) != self.arch.n_layers:
            raise ValueError("one weight matrix and bias vector per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (sizes[i + 1], sizes[i])
            if w.shape != expect:
                raise ValueError(f"layer {i} weight shape {w.shape}, expected {expect}")
            if b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} bias shape {b.shape}, expected ({sizes[i + 1]},)")


@dataclass
class Gradients:
    """Loss gradients in the same shapes as NetworkParams."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


def count_params(arch: ArchSpec) -> int:
    """Trainable scalars: sum of fan_in*fan_out + fan_out over layers."""
    sizes = arch.layer_sizes
    return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(arch.n_layers))


def count_flops(arch: ArchSpec) -> int:
    """Dense multiply-accumulate count per forward pass: (2*fan_in - 1)*fan_out summed."""
    sizes = arch.layer_sizes
    return sum((2 * sizes[i] - 1) * sizes[i + 1] for i in range(arch.n_layers))


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(arch: ArchSpec, rng: np.random.Generator) -> NetworkParams:
    """Glorot-uniform weights on +/-sqrt(6/(fan_in+fan_out)), zero biases."""
    weights, biases = [], []
    sizes = arch.layer_sizes
    for i in range(arch.n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        a = glorot_limit(fan_in, fan_out)
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights=weights, biases=biases, arch=arch)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        # Branch on sign so neither exp overflows.
        out = np.empty_like(z)
        pos = z >= 0.0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise ValueError(f"unknown activation {name!r}")


def _activate_prime(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # a is the already-computed activation of z; relu'(0) is taken as 0.
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


def _forward_trace(params: NetworkParams, X: np.ndarray):
    """All layer pre-activations and activations, for backprop."""
    arch = params.arch
    pre, act = [], [X]
    h = X
    for i in range(arch.n_layers):
        z = h @ params.weights[i].T + params.biases[i]
        name = arch.output_activation if i == arch.n_layers - 1 else arch.hidden_activation
        h = _activate(name, z)
        pre.append(z)
        act.append(h)
    return pre, act


def forward(params: NetworkParams, X) -> np.ndarray:
    """Batch forward pass: (V, d) -> (V, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.arch.layer_sizes[0]:
        raise ValueError(
            f"input width {X.shape[1]}, network expects {params.arch.layer_sizes[0]}")
    _, act = _forward_trace(params, X)
    return act[-1]


def mse_loss(pred, label) -> float:
    """Mean over batch and feature dimensions of the squared error."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(label, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def _gradients_from_trace(params: NetworkParams, pre, act, Y) -> Gradients:
    arch = params.arch
    d_weights = [None] * arch.n_layers
    d_biases = [None] * arch.n_layers
    # dL/d(output activation), then walk the chain backwards.
    delta = 2.0 * (act[-1] - Y) / Y.size
    for i in range(arch.n_layers - 1, -1, -1):
        name = arch.output_activation if i == arch.n_layers - 1 else arch.hidden_activation
        delta = delta * _activate_prime(name, pre[i], act[i + 1])
        d_weights[i] = delta.T @ act[i]
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i]
    return Gradients(d_weights=d_weights, d_biases=d_biases)


def backward(params: NetworkParams, X, Y) -> Gradients:
    """Gradients of mse_loss(forward(params, X), Y) w.r.t. every parameter."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape:
        raise ValueError(f"input/label shape mismatch: {X.shape} vs {Y.shape}")
    pre, act = _forward_trace(params, X)
    return _gradients_from_trace(params, pre, act, Y)


@dataclass
class AdamState:
    """First/second moment accumulators and step counter."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    t: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: NetworkParams, learning_rate: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in params.weights],
            v_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_biases=[np.zeros_like(b) for b in params.biases],
            t=0, learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: NetworkParams,
              grads: Gradients) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected ADAM update; returns fresh params and state.

    At t=1 the update reduces exactly to -lr * g / (|g| + eps).
    """
    t = state.t + 1
    b1, b2, lr, eps = state.beta1, state.beta2, state.learning_rate, state.eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t

    def update(theta, m, v, g):
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g * g
        step = lr * (m_new / c1) / (np.sqrt(v_new / c2) + eps)
        return theta - step, m_new, v_new

    new_w, new_mw, new_vw = [], [], []
    for w, m, v, g in zip(params.weights, state.m_weights, state.v_weights,
                          grads.d_weights):
        wn, mn, vn = update(w, m, v, g)
        new_w.append(wn); new_mw.append(mn); new_vw.append(vn)
    new_b, new_mb, new_vb = [], [], []
    for b, m, v, g in zip(params.biases, state.m_biases, state.v_biases,
                          grads.d_biases):
        bn, mn, vn = update(b, m, v, g)
        new_b.append(bn); new_mb.append(mn); new_vb.append(vn)

    new_params = NetworkParams(weights=new_w, biases=new_b, arch=params.arch)
    new_state = AdamState(m_weights=new_mw, v_weights=new_vw, m_biases=new_mb,
                          v_biases=new_vb, t=t, learning_rate=lr, beta1=b1,
                          beta2=b2, eps=eps)
    return new_params, new_state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 128
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def train(arch: ArchSpec, train_set: Dataset, cfg: TrainConfig,
          eval_set: Dataset):
    """Mini-batch ADAM training of the band-1 -> band-2 regression.

    Rows are reshuffled every epoch; the trailing short batch is used. The
    trace holds one record per epoch with the sample-weighted training loss,
    the eval NMSE, and wall time. Fully deterministic given cfg.seed.
    """
    if train_set.n_features != arch.layer_sizes[0]:
        raise ValueError(
            f"dataset width {train_set.n_features} does not match network "
            f"input {arch.layer_sizes[0]}")
    if eval_set.n_features != train_set.n_features:
        raise ValueError("train and eval feature widths differ")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    params = init_params(arch, rng)
    state = AdamState.fresh(params, learning_rate=cfg.learning_rate,
                            beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    n = len(train_set)
    trace: list[dict] = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = train_set.band1[idx]
            yb = train_set.band2[idx]
            pre, act = _forward_trace(params, xb)
            loss_sum += mse_loss(act[-1], yb) * idx.size
            grads = _gradients_from_trace(params, pre, act, yb)
            params, state = adam_step(state, params, grads)
        eval_pred = forward(params, eval_set.band1)
        trace.append({
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "eval_nmse": nmse(eval_pred, eval_set.band2),
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        })
    return params, trace
