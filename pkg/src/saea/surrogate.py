"""Fully connected ReLU regression network used as the fitness surrogate.

Two hidden layers sized 1.5*D and D, a single linear output, MSE loss and
Adam. Written directly on numpy so the forward pass, the backward pass and
the hidden activations are all inspectable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_VERSION = 1
HIST_BINS = 64


class UntrainedError(RuntimeError):
    """Raised when an untrained network is asked to predict."""


@dataclass(frozen=True)
class NetSpec:
    n_inputs: int
    hidden1: int
    hidden2: int
    seed: int = 0

    @classmethod
    def for_dimension(cls, d: int, seed: int = 0) -> "NetSpec":
        return cls(d, math.ceil(1.5 * d), d, seed)

    def __post_init__(self):
        if min(self.n_inputs, self.hidden1, self.hidden2) < 1:
            raise ValueError("all layer sizes must be >= 1")

    @property
    def layer_sizes(self) -> tuple[int, int, int, int]:
        return (self.n_inputs, self.hidden1, self.hidden2, 1)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1.0e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class TrainReport:
    final_loss: float
    epochs_run: int
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class SparsityReport:
    zero_ratio_hidden1: float
    zero_ratio_hidden2: float
    # name -> (counts, bin_edges) for W1, b1, W2, b2, W3, b3
    histograms: dict[str, tuple[np.ndarray, np.ndarray]]


class MinMaxScaler:
    """Per-column min-max map to [0, 1]; constant columns map to 0."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        span = self.hi - self.lo
        self.span = np.where(span > 0, span, 1.0)

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.lo) / self.span


class ZScaler:
    def __init__(self, mean: float, std: float):
        self.mean = float(mean)
        self.std = float(std) if std > 0 else 1.0

    @classmethod
    def fit(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y.mean(), y.std())

    def transform(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def inverse_transform(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


def _init_params(spec: NetSpec) -> list[np.ndarray]:
    rng = np.random.default_rng(spec.seed)
    params = []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: Sequence[np.ndarray], X: np.ndarray):
    """Return output column plus the cached pre/post activations."""
    W1, b1, W2, b2, W3, b3 = params
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W2 + b2
    a2 = np.maximum(z2, 0.0)
    out = a2 @ W3 + b3
    return out[:, 0], (X, z1, a1, z2, a2)


def loss_and_grad(params: Sequence[np.ndarray], X: np.ndarray, y: np.ndarray):
    """Mean squared error on a batch and its gradient w.r.t. every parameter."""
    W1, b1, W2, b2, W3, b3 = params
    pred, (X, z1, a1, z2, a2) = forward(params, X)
    n = X.shape[0]
    err = pred - y
    loss = float(np.mean(err * err))

    d_out = (2.0 / n) * err[:, None]
    gW3 = a2.T @ d_out
    gb3 = d_out.sum(axis=0)
    d_a2 = d_out @ W3.T
    d_z2 = d_a2 * (z2 > 0)
    gW2 = a1.T @ d_z2
    gb2 = d_z2.sum(axis=0)
    d_a1 = d_z2 @ W2.T
    d_z1 = d_a1 * (z1 > 0)
    gW1 = X.T @ d_z1
    gb1 = d_z1.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2, gW3, gb3]


class SurrogateNet:
    """Two-hidden-layer ReLU perceptron with input/output scaling."""

    def __init__(self, spec: NetSpec):
        self.spec = spec
        self.params = _init_params(spec)
        self.input_scaler: MinMaxScaler | None = None
        self.output_scaler: ZScaler | None = None
        self.trained = False

    # parameter views, mostly for tests and histograms
    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        p = self.params
        return [(p[0], p[1]), (p[2], p[3]), (p[4], p[5])]

    def reinitialize(self) -> None:
        self.params = _init_params(self.spec)
        self.input_scaler = None
        self.output_scaler = None
        self.trained = False

    def _scaled(self, X) -> np.ndarray:
        if not self.trained:
            raise UntrainedError("surrogate has not been trained")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.spec.n_inputs:
            raise ValueError(f"expected {self.spec.n_inputs} inputs, got {X.shape[1]}")
        return self.input_scaler.transform(X)

    def predict_batch(self, X) -> np.ndarray:
        out, _ = forward(self.params, self._scaled(X))
        return self.output_scaler.inverse_transform(out)

    def predict(self, s) -> float:
        return float(self.predict_batch(np.asarray(s)[None, :])[0])

    def hidden_activations(self, X) -> tuple[np.ndarray, np.ndarray]:
        _, (_, _, a1, _, a2) = forward(self.params, self._scaled(X))
        return a1, a2

    def set_identity_scalers(self) -> None:
        """Install no-op scalers; used to exercise a hand-set network."""
        n = self.spec.n_inputs
        self.input_scaler = MinMaxScaler(np.zeros(n), np.ones(n))
        self.output_scaler = ZScaler(0.0, 1.0)
        self.trained = True


def build(spec: NetSpec) -> SurrogateNet:
    return SurrogateNet(spec)


def param_count(net: SurrogateNet | NetSpec) -> int:
    spec = net.spec if isinstance(net, SurrogateNet) else net
    sizes = spec.layer_sizes
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def _as_arrays(net: SurrogateNet, dataset):
    if (isinstance(dataset, tuple) and len(dataset) == 2
            and isinstance(dataset[0], np.ndarray) and dataset[0].ndim == 2):
        X, y = dataset
    else:
        if len(dataset) == 0:
            raise ValueError("training dataset is empty")
        X = [s for s, _ in dataset]
        y = [f for _, f in dataset]
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("training dataset is empty")
    if X.shape[1] != net.spec.n_inputs:
        raise ValueError(
            f"dataset dimension {X.shape[1]} != network inputs {net.spec.n_inputs}"
        )
    if X.shape[0] != y.shape[0]:
        raise ValueError("solutions and objective values differ in length")
    if not np.all(np.isfinite(y)):
        raise ValueError("dataset contains non-finite objective values")
    return X, y


def train(net: SurrogateNet, dataset, cfg: TrainConfig = TrainConfig(), rng_seed: int = 0) -> TrainReport:
    """Fit scalers on ``dataset`` and run mini-batch Adam on the current weights.

    ``dataset`` is a sequence of (solution, F) pairs or an ``(X, y)`` tuple.
    Batches are drawn from a fresh seeded permutation each epoch; the last
    short batch is kept. ``final_loss`` is the last epoch's mean batch loss
    in scaled units.
    """
    X, y = _as_arrays(net, dataset)
    net.input_scaler = MinMaxScaler.fit(X)
    net.output_scaler = ZScaler.fit(y)
    Xs = net.input_scaler.transform(X)
    ys = net.output_scaler.transform(y)

    rng = np.random.default_rng(rng_seed)
    params = net.params
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate
    n = Xs.shape[0]
    step = 0
    epoch_losses = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(params, Xs[idx], ys[idx])
            batch_losses.append(loss)
            step += 1
            corr1 = 1.0 - b1 ** step
            corr2 = 1.0 - b2 ** step
            for p, g, mk, vk in zip(params, grads, m, v):
                mk *= b1
                mk += (1.0 - b1) * g
                vk *= b2
                vk += (1.0 - b2) * (g * g)
                p -= lr * (mk / corr1) / (np.sqrt(vk / corr2) + eps)
        epoch_losses.append(float(np.mean(batch_losses)))
    net.trained = True
    return TrainReport(final_loss=epoch_losses[-1], epochs_run=cfg.epochs, epoch_losses=epoch_losses)


def retrain(net: SurrogateNet, dataset, cfg: TrainConfig = TrainConfig(), rng_seed: int = 0) -> TrainReport:
    """Reset to the seeded initial weights, then train on ``dataset``."""
    net.reinitialize()
    return train(net, dataset, cfg, rng_seed)


def predict(net: SurrogateNet, s) -> float:
    return net.predict(s)


def sparsity(net: SurrogateNet, probes) -> SparsityReport:
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] == 0:
        raise ValueError("need at least one probe")
    a1, a2 = net.hidden_activations(probes)
    hists = {}
    names = ["W1", "b1", "W2", "b2", "W3", "b3"]
    for name, p in zip(names, net.params):
        flat = p.ravel()
        lo, hi = float(flat.min()), float(flat.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        hists[name] = np.histogram(flat, bins=HIST_BINS, range=(lo, hi))
    return SparsityReport(
        zero_ratio_hidden1=100.0 * float(np.mean(a1 == 0.0)),
        zero_ratio_hidden2=100.0 * float(np.mean(a2 == 0.0)),
        histograms=hists,
    )


def save(net: SurrogateNet, path) -> None:
    """Write a versioned ``.npz`` checkpoint (spec, scalers, weights)."""
    arrays = {f"p{k}": p for k, p in enumerate(net.params)}
    spec = net.spec
    arrays["meta"] = np.array(
        [CHECKPOINT_VERSION, spec.n_inputs, spec.hidden1, spec.hidden2, spec.seed, int(net.trained)],
        dtype=np.int64,
    )
    if net.trained:
        arrays["in_lo"] = net.input_scaler.lo
        arrays["in_hi"] = net.input_scaler.hi
        arrays["out"] = np.array([net.output_scaler.mean, net.output_scaler.std])
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load(path) -> SurrogateNet:
    with np.load(Path(path)) as data:
        version, n_in, h1, h2, seed, trained = (int(v) for v in data["meta"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = SurrogateNet(NetSpec(n_in, h1, h2, seed))
        net.params = [data[f"p{k}"].copy() for k in range(6)]
        if trained:
            net.input_scaler = MinMaxScaler(data["in_lo"], data["in_hi"])
            out = data["out"]
            net.output_scaler = ZScaler(out[0], out[1])
            net.trained = True
    return net
