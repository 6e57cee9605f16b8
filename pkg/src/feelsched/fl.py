"""Toy federated averaging: softmax regression on a synthetic Gaussian-mixture task.

Model parameters are a flat ``np.ndarray`` of length ``n_features * n_classes + n_classes``
(weights row-major, then biases).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "SoftmaxModel",
    "ClientDataset",
    "SyntheticTask",
    "SGDConfig",
    "make_synthetic_task",
    "partition_noniid",
    "local_sgd",
    "aggregate",
    "evaluate",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class SoftmaxModel:
    n_features: int
    n_classes: int

    @property
    def dim(self) -> int:
        return self.n_features * self.n_classes + self.n_classes

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)

    def unpack(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected a parameter vector of length {self.dim}, got {theta.shape}")
        split = self.n_features * self.n_classes
        return theta[:split].reshape(self.n_features, self.n_classes), theta[split:]

    def logits(self, theta, x):
        w, b = self.unpack(theta)
        return x @ w + b

    def loss(self, theta, x, y) -> float:
        """Mean cross-entropy."""
        z = self.logits(theta, x)
        z = z - z.max(axis=1, keepdims=True)
        log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-log_p[np.arange(len(y)), y].mean())

    def grad(self, theta, x, y) -> np.ndarray:
        z = self.logits(theta, x)
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(len(y)), y] -= 1.0
        p /= len(y)
        return np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])

    def predict(self, theta, x) -> np.ndarray:
        return np.argmax(self.logits(theta, x), axis=1)


@dataclass
class ClientDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if len(self.x) == 0 or len(self.x) != len(self.y):
            raise ValueError("client dataset must be nonempty with matching x and y")

    @property
    def size(self) -> int:
        return len(self.y)

    def class_histogram(self, n_classes: int) -> np.ndarray:
        return np.bincount(self.y, minlength=n_classes)


@dataclass
class SyntheticTask:
    model: SoftmaxModel
    means: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray


def make_synthetic_task(
    rng: np.random.Generator,
    n_classes: int = 10,
    n_features: int = 20,
    train_per_class: int = 5000,
    test_per_class: int = 1000,
    separation: float = 1.0,
) -> SyntheticTask:
    """Balanced Gaussian mixture: class means ``N(0, separation^2 I)``, unit-variance noise."""
    means = separation * rng.standard_normal((n_classes, n_features))

    def draw(per_class):
        y = np.repeat(np.arange(n_classes), per_class)
        x = means[y] + rng.standard_normal((len(y), n_features))
        return x, y

    x_train, y_train = draw(train_per_class)
    x_test, y_test = draw(test_per_class)
    return SyntheticTask(SoftmaxModel(n_features, n_classes), means, x_train, y_train, x_test, y_test)


def partition_noniid(x, y, n_clients: int, classes_per_client: int, samples_per_client: int,
                     rng: np.random.Generator) -> list:
    """Split into disjoint client datasets, each built from ``classes_per_client`` single-class shards.

    Shards hold ``samples_per_client / classes_per_client`` samples of one class and are dealt
    out at random, so each client sees at most ``classes_per_client`` classes.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if classes_per_client < 1 or samples_per_client < 1 or n_clients < 1:
        raise ValueError("partition sizes must be positive")
    if samples_per_client % classes_per_client:
        raise ValueError("samples_per_client must be a multiple of classes_per_client")
    if n_clients * samples_per_client > len(y):
        raise ValueError(f"need {n_clients * samples_per_client} samples, have {len(y)}")
    shard = samples_per_client // classes_per_client
    shards = []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        shards.extend(idx[i:i + shard] for i in range(0, len(idx) - shard + 1, shard))
    needed = n_clients * classes_per_client
    if len(shards) < needed:
        raise ValueError(f"infeasible partition: {len(shards)} single-class shards of size {shard}, need {needed}")
    pick = rng.permutation(len(shards))[:needed].reshape(n_clients, classes_per_client)
    out = []
    for row in pick:
        idx = np.concatenate([shards[i] for i in row])
        out.append(ClientDataset(x[idx], y[idx]))
    return out


@dataclass(frozen=True)
class SGDConfig:
    tau: int = 4
    batch_size: int = 32
    learning_rate: float = 0.05

    def __post_init__(self):
        if self.tau < 1 or self.batch_size < 1:
            raise ValueError("tau and batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


def local_sgd(theta: np.ndarray, data: ClientDataset, cfg: SGDConfig, rng: np.random.Generator,
              model: SoftmaxModel) -> np.ndarray:
    """``tau`` mini-batch SGD steps starting from ``theta``; returns the new vector."""
    if cfg.batch_size > data.size:
        raise ValueError(f"batch size {cfg.batch_size} exceeds local dataset size {data.size}")
    theta = np.array(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError("local SGD started from a non-finite model")
    for step in range(cfg.tau):
        batch = rng.choice(data.size, cfg.batch_size, replace=False)
        g = model.grad(theta, data.x[batch], data.y[batch])
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at local step {step}: |theta|_max={np.abs(theta).max():.3g}, "
                f"lr={cfg.learning_rate}"
            )
        theta -= cfg.learning_rate * g
    return theta


def aggregate(models: Sequence[np.ndarray]) -> np.ndarray:
    if len(models) == 0:
        raise ValueError("cannot aggregate an empty list of models")
    dims = {np.shape(m) for m in models}
    if len(dims) != 1:
        raise ValueError(f"model dimension mismatch: {sorted(dims)}")
    return np.mean(np.stack(models), axis=0)


def evaluate(theta, x_test, y_test, model: SoftmaxModel) -> float:
    if len(y_test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict(theta, x_test) == y_test))


def save_model(path, theta) -> None:
    """Plain-text checkpoint: a ``dim <d>`` header, then one value per line."""
    theta = np.asarray(theta, dtype=float).ravel()
    lines = [f"dim {theta.size}"] + [repr(float(v)) for v in theta]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> np.ndarray:
    lines = Path(path).read_text().split()
    if len(lines) < 2 or lines[0] != "dim":
        raise ValueError(f"{path}: missing 'dim' header")
    d = int(lines[1])
    values = np.array([float(v) for v in lines[2:]])
    if values.size != d:
        raise ValueError(f"{path}: header says {d} values, found {values.size}")
    return values
