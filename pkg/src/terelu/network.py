"""Sequential models, softmax cross-entropy and SGD-with-momentum training."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from terelu.activations import ActivationSpec, Kind
from terelu.data import Dataset, batch_indices
from terelu.layers import Activation, BatchNorm, Dense, Layer, Maxout
from terelu.numerics import Rng, ShapeError, argmax_rows


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch, self.batch, self.loss = epoch, batch, loss


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class MetricsRow:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    beta_values: list[float] = field(default_factory=list)


class Model:
    def __init__(self, layers: list[Layer], seed: int = 0):
        self.layers = list(layers)
        self.seed = seed

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [pair for layer in self.layers for pair in layer.params()]

    def terelu_layers(self) -> list[Activation]:
        return [l for l in self.layers if isinstance(l, Activation) and l.kind is Kind.TERELU]

    def beta_values(self) -> list[float]:
        return [float(l.beta[0, 0]) for l in self.terelu_layers()]

    def __repr__(self):
        return "Model([" + ", ".join(map(repr, self.layers)) + "])"


def init_std(fan_in: int, spec: ActivationSpec | None) -> float:
    # He init for rectifier-like units, LeCun init for tanh and the linear head.
    if spec is not None and spec.is_rectifier:
        return math.sqrt(2.0 / fan_in)
    return math.sqrt(1.0 / fan_in)


def build_fcnn(depth_hidden: int, width: int, input_dim: int, classes: int,
               activation: ActivationSpec, use_bn: bool = True, seed: int = 0) -> Model:
    """``depth_hidden`` blocks of Dense -> BatchNorm -> Activation, then a linear head."""
    if depth_hidden < 1 or width < 1 or input_dim < 1 or classes < 1:
        raise ValueError(f"invalid FCNN dimensions: depth={depth_hidden}, width={width}, "
                         f"input={input_dim}, classes={classes}")
    rng = Rng(seed)
    layers: list[Layer] = []
    fan_in = input_dim
    for _ in range(depth_hidden):
        layers.append(Dense(fan_in, width, rng, init_std(fan_in, activation)))
        if use_bn:
            layers.append(BatchNorm(width))
        layers.append(Activation(activation))
        fan_in = width
    layers.append(Dense(fan_in, classes, rng, init_std(fan_in, None)))
    return Model(layers, seed)


def build_maxout_net(depth_hidden: int, width: int, input_dim: int, classes: int, k: int = 2,
                     use_bn: bool = True, seed: int = 0) -> Model:
    """Maxout blocks (optionally followed by BatchNorm) and a linear head.

    A maxout unit already is the nonlinearity, so there is no pre-activation
    slot for BatchNorm; it normalizes the maxout outputs instead.
    """
    if depth_hidden < 1 or width < 1 or input_dim < 1 or classes < 1:
        raise ValueError("invalid maxout network dimensions")
    rng = Rng(seed)
    layers: list[Layer] = []
    fan_in = input_dim
    for _ in range(depth_hidden):
        layers.append(Maxout(fan_in, width, k, rng, math.sqrt(1.0 / fan_in)))
        if use_bn:
            layers.append(BatchNorm(width))
        fan_in = width
    layers.append(Dense(fan_in, classes, rng, math.sqrt(1.0 / fan_in)))
    return Model(layers, seed)


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient ``(softmax - onehot) / batch``."""
    n, c = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"{n} logit rows but labels shaped {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    rows = np.arange(n)
    loss = float(-log_p[rows, labels].mean())
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    return loss, grad / n


class SGD:
    """Classical momentum: ``v = m*v - lr*g; p += v``."""

    def __init__(self, params: list[tuple[np.ndarray, np.ndarray]], learning_rate: float,
                 momentum: float):
        self.params = params
        self.lr = learning_rate
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p, _ in params]

    def step(self) -> None:
        for (p, g), v in zip(self.params, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            p += v


def train_epoch(model: Model, dataset: Dataset, config: TrainConfig, rng: Rng,
                optimizer: SGD | None = None, epoch: int = 0) -> tuple[float, float]:
    """One shuffled pass; returns the example-weighted mean loss and accuracy."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if optimizer is None:
        optimizer = SGD(model.params(), config.learning_rate, config.momentum)
    total_loss = 0.0
    correct = 0
    for b, idx in enumerate(batch_indices(len(dataset), config.batch_size, rng)):
        x, y = dataset.features[idx], dataset.labels[idx]
        logits = model.forward(x, training=True)
        loss, grad = softmax_xent(logits, y)
        if not math.isfinite(loss):
            raise DivergenceError(epoch, b, loss)
        model.backward(grad)
        optimizer.step()
        total_loss += loss * idx.size
        correct += int(np.sum(argmax_rows(logits) == y))
    return total_loss / len(dataset), correct / len(dataset)


def evaluate(model: Model, dataset: Dataset, batch_size: int = 1000) -> tuple[float, float]:
    """Eval-mode loss and accuracy; parameters and running statistics untouched."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    total_loss = 0.0
    correct = 0
    for start in range(0, len(dataset), batch_size):
        x = dataset.features[start:start + batch_size]
        y = dataset.labels[start:start + batch_size]
        logits = model.forward(x, training=False)
        loss, _ = softmax_xent(logits, y)
        total_loss += loss * y.size
        correct += int(np.sum(argmax_rows(logits) == y))
    return total_loss / len(dataset), correct / len(dataset)


def fit(model: Model, train: Dataset, val: Dataset, config: TrainConfig) -> Iterator[MetricsRow]:
    """Train for ``config.epochs`` epochs, yielding one row per epoch.

    Raises DivergenceError on a non-finite loss; rows already yielded stand.
    """
    rng = Rng(config.seed)
    optimizer = SGD(model.params(), config.learning_rate, config.momentum)
    for epoch in range(1, config.epochs + 1):
        train_loss, train_acc = train_epoch(model, train, config, rng, optimizer, epoch)
        val_loss, val_acc = evaluate(model, val)
        if not math.isfinite(val_loss):
            raise DivergenceError(epoch, -1, val_loss)
        yield MetricsRow(epoch, train_loss, train_acc, val_loss, val_acc, model.beta_values())
