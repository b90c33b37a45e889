"""Network layers with explicit forward/backward passes.

Each layer exposes ``forward(x, training)``, ``backward(upstream)`` and
``params()``. ``params()`` returns ``(value, grad)`` array pairs; both are the
live arrays the layer uses, so an optimizer updates them in place.
"""

from __future__ import annotations

import logging

import numpy as np

from terelu.activations import ActivationSpec, Kind, act_dx, act_forward, terelu_fused
from terelu.numerics import Rng, ShapeError, add_row_broadcast, column_mean_var, matmul

log = logging.getLogger(__name__)


class LayerStateError(RuntimeError):
    """backward() was called without a matching forward()."""


class Layer:
    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return []

    def zero_grad(self) -> None:
        for _, g in self.params():
            g.fill(0.0)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: Rng | None = None, init_std: float = 0.0):
        if n_in < 1 or n_out < 1:
            raise ValueError(f"Dense needs positive sizes, got {n_in}x{n_out}")
        self.n_in, self.n_out = n_in, n_out
        self.W = rng.normal(n_in, n_out, init_std) if rng is not None else np.zeros((n_in, n_out))
        self.b = np.zeros((1, n_out))
        self.grad_W = np.zeros_like(self.W)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"Dense expects (batch, {self.n_in}) input, got {x.shape}")
        self._x = x
        return add_row_broadcast(matmul(x, self.W), self.b)

    def backward(self, upstream):
        if self._x is None:
            raise LayerStateError("Dense.backward called before forward")
        if upstream.shape != (self._x.shape[0], self.n_out):
            raise ShapeError(f"Dense upstream {upstream.shape} does not match output "
                             f"{(self._x.shape[0], self.n_out)}")
        self.grad_W[...] = self._x.T @ upstream
        self.grad_b[...] = upstream.sum(axis=0, keepdims=True)
        return upstream @ self.W.T

    def params(self):
        return [(self.W, self.grad_W), (self.b, self.grad_b)]

    def __repr__(self):
        return f"Dense({self.n_in}, {self.n_out})"


class BatchNorm(Layer):
    """Per-feature batch normalization with learnable scale ``gamma`` and shift ``delta``.

    Training mode normalizes with the batch mean and biased variance and
    folds them into exponential running averages
    (``running = momentum * running + (1 - momentum) * batch``); eval mode
    uses the running averages.
    """

    def __init__(self, n: int, eps: float = 1e-5, momentum: float = 0.9):
        if eps <= 0:
            raise ValueError(f"eps must be > 0, got {eps}")
        self.n = n
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones((1, n))
        self.delta = np.zeros((1, n))
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_delta = np.zeros_like(self.delta)
        self.running_mean = np.zeros((1, n))
        self.running_var = np.ones((1, n))
        self._cache = None

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.n:
            raise ShapeError(f"BatchNorm expects (batch, {self.n}) input, got {x.shape}")
        if not training:
            self._cache = None
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            return self.gamma * xhat + self.delta
        if x.shape[0] < 2:
            raise ValueError(f"BatchNorm in training mode needs batch >= 2, got {x.shape[0]}")
        mean, var = column_mean_var(x)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std)
        m = self.momentum
        self.running_mean = m * self.running_mean + (1 - m) * mean
        self.running_var = m * self.running_var + (1 - m) * var
        return self.gamma * xhat + self.delta

    def backward(self, upstream):
        if self._cache is None:
            raise LayerStateError("BatchNorm.backward needs a preceding training-mode forward")
        xhat, inv_std = self._cache
        if upstream.shape != xhat.shape:
            raise ShapeError(f"BatchNorm upstream {upstream.shape} vs output {xhat.shape}")
        n = upstream.shape[0]
        self.grad_delta[...] = upstream.sum(axis=0, keepdims=True)
        self.grad_gamma[...] = (upstream * xhat).sum(axis=0, keepdims=True)
        dxhat = upstream * self.gamma
        # closed form of the mean/variance pathways
        return (inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=0, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=0, keepdims=True)
        )

    def params(self):
        return [(self.gamma, self.grad_gamma), (self.delta, self.grad_delta)]

    def __repr__(self):
        return f"BatchNorm({self.n})"


class Activation(Layer):
    """Elementwise activation. For TERELU, ``beta`` is a trainable scalar per layer."""

    def __init__(self, spec: ActivationSpec):
        self.kind = spec.kind
        self._base = spec
        if spec.kind is Kind.TERELU:
            self.beta = np.array([[spec.params.beta]])
            self.grad_beta = np.zeros((1, 1))
        else:
            self.beta = None
            self.grad_beta = np.zeros((1, 1))
        self._x = None
        self._warned = False

    @property
    def spec(self) -> ActivationSpec:
        if self.beta is None:
            return self._base
        return self._base.with_beta(float(self.beta[0, 0]))

    def forward(self, x, training=True):
        spec = self.spec
        if self.beta is not None and self.beta[0, 0] <= 0 and not self._warned:
            log.warning("TERELU beta is %g (<= 0); the activation is no longer monotone",
                        self.beta[0, 0])
            self._warned = True
        self._x = x
        if self.beta is not None:
            y, self._dx, self._dbeta = terelu_fused(spec.params, x)
            return y
        return act_forward(spec, x)

    def backward(self, upstream):
        if self._x is None:
            raise LayerStateError("Activation.backward called before forward")
        if self.beta is not None:
            self.grad_beta[0, 0] = float(np.sum(upstream * self._dbeta))
            return upstream * self._dx
        return upstream * act_dx(self.spec, self._x)

    def params(self):
        if self.beta is None:
            return []
        return [(self.beta, self.grad_beta)]

    def __repr__(self):
        return f"Activation({self.kind.value})"


class Maxout(Layer):
    """``h_j(x) = max_p (x @ W[p] + b[p])_j`` over ``k`` affine pieces.

    The winning piece per (example, unit) is recorded at forward time, lowest
    index on ties, and the backward pass routes gradient through it only.
    """

    def __init__(self, n_in: int, n_out: int, k: int = 2, rng: Rng | None = None,
                 init_std: float = 0.0):
        if k < 2:
            raise ValueError(f"Maxout needs k >= 2 pieces, got {k}")
        self.n_in, self.n_out, self.k = n_in, n_out, k
        self.W = [rng.normal(n_in, n_out, init_std) if rng is not None else np.zeros((n_in, n_out))
                  for _ in range(k)]
        self.b = [np.zeros((1, n_out)) for _ in range(k)]
        self.grad_W = [np.zeros((n_in, n_out)) for _ in range(k)]
        self.grad_b = [np.zeros((1, n_out)) for _ in range(k)]
        self._x = None
        self.cache_argmax = None

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"Maxout expects (batch, {self.n_in}) input, got {x.shape}")
        z = np.stack([add_row_broadcast(matmul(x, W), b) for W, b in zip(self.W, self.b)])
        self._x = x
        self.cache_argmax = np.argmax(z, axis=0)
        return np.take_along_axis(z, self.cache_argmax[None], axis=0)[0]

    def backward(self, upstream):
        if self._x is None:
            raise LayerStateError("Maxout.backward called before forward")
        down = np.zeros_like(self._x)
        for p in range(self.k):
            g = np.where(self.cache_argmax == p, upstream, 0.0)
            self.grad_W[p][...] = self._x.T @ g
            self.grad_b[p][...] = g.sum(axis=0, keepdims=True)
            down += g @ self.W[p].T
        return down

    def params(self):
        out = []
        for p in range(self.k):
            out += [(self.W[p], self.grad_W[p]), (self.b[p], self.grad_b[p])]
        return out

    def __repr__(self):
        return f"Maxout({self.n_in}, {self.n_out}, k={self.k})"
