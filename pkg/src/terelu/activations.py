"""Activation functions: forward value, input derivative and the TERELU
beta-derivative.

Every function accepts either a Python float or a numpy array and returns the
same kind of object. Exponentials are only ever evaluated on non-positive
arguments, so nothing overflows however large the input.

TERELU (thresholded exponential rectified linear unit)::

    f(x) = alpha * (exp(x) - 1)                 x <= 0
         = x                                    0 < x < mu
         = beta * (mu - (exp(mu - x) - 1))      x >= mu

with derivative ``f(x) + alpha`` on the first branch, ``1`` on the middle one
and ``-f(x) + beta*mu + beta`` on the last. ``alpha`` and ``mu`` are fixed
hyperparameters, ``beta`` is trained. For ``beta != 1`` the function jumps at
``x = mu`` (from ``mu`` to ``beta*mu``); that is evaluated literally.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

ArrayOrFloat = Union[float, np.ndarray]


class Kind(str, enum.Enum):
    RELU = "relu"
    LRELU = "lrelu"
    ELU = "elu"
    SRELU = "srelu"
    APL = "apl"
    SOFTPLUS = "softplus"
    TANH = "tanh"
    TERELU = "terelu"


@dataclass(frozen=True)
class TereluParams:
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"TERELU alpha must be > 0, got {self.alpha}")
        if not self.mu > 0:
            raise ValueError(f"TERELU mu must be > 0, got {self.mu}")


@dataclass(frozen=True)
class EluParams:
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"ELU alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class LreluParams:
    alpha: float = 0.01

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"leaky ReLU slope must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class SreluParams:
    """S-shaped ReLU with fixed thresholds ``t_l <= t_r`` and outer slopes."""

    t_r: float = 1.0
    a_r: float = 0.5
    t_l: float = -1.0
    a_l: float = 0.1

    def __post_init__(self):
        if self.t_l > self.t_r:
            raise ValueError(f"SReLU needs t_l <= t_r, got t_l={self.t_l}, t_r={self.t_r}")


@dataclass(frozen=True)
class AplParams:
    """Adaptive piecewise linear unit: ``max(0,x) + sum_s a_s*max(0, b_s - x)``."""

    a: tuple[float, ...] = (0.5,)
    b: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) < 1 or len(self.a) != len(self.b):
            raise ValueError(
                f"APL needs S >= 1 hinges with matching a/b, got {len(self.a)} and {len(self.b)}"
            )

    @property
    def hinge_count(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class SoftplusParams:
    """Parametric softplus ``alpha * log(1 + exp(beta*x))``."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("softplus beta must be nonzero")


_PARAM_TYPES = {
    Kind.RELU: type(None),
    Kind.TANH: type(None),
    Kind.LRELU: LreluParams,
    Kind.ELU: EluParams,
    Kind.SRELU: SreluParams,
    Kind.APL: AplParams,
    Kind.SOFTPLUS: SoftplusParams,
    Kind.TERELU: TereluParams,
}


@dataclass(frozen=True)
class ActivationSpec:
    kind: Kind
    params: object = field(default=None)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        expected = _PARAM_TYPES[kind]
        if self.params is None and expected is not type(None):
            object.__setattr__(self, "params", expected())
        if not isinstance(self.params, expected):
            raise TypeError(
                f"{kind.value} expects {expected.__name__} params, got {type(self.params).__name__}"
            )

    @classmethod
    def of(cls, name: str, **params) -> "ActivationSpec":
        """Build a spec by name, e.g. ``ActivationSpec.of("terelu", mu=2.0)``."""
        kind = Kind(name.lower())
        ptype = _PARAM_TYPES[kind]
        if ptype is type(None):
            if params:
                raise TypeError(f"{kind.value} takes no parameters")
            return cls(kind)
        return cls(kind, ptype(**params))

    def with_beta(self, beta: float) -> "ActivationSpec":
        if self.kind is not Kind.TERELU:
            raise TypeError("only TERELU has a trainable beta")
        return ActivationSpec(self.kind, replace(self.params, beta=float(beta)))

    @property
    def is_rectifier(self) -> bool:
        return self.kind is not Kind.TANH


def _out(x, y):
    return float(y) if np.ndim(x) == 0 else y


def _elu_like(x: np.ndarray, alpha: float) -> np.ndarray:
    # Shared by ELU and TERELU so their sub-threshold branches agree bit for bit.
    return np.where(x <= 0, alpha * np.expm1(np.minimum(x, 0.0)), x)


def terelu_forward(p: TereluParams, x: ArrayOrFloat) -> ArrayOrFloat:
    xa = np.asarray(x, dtype=np.float64)
    upper = p.beta * (p.mu - np.expm1(np.minimum(p.mu - xa, 0.0)))
    return _out(x, np.where(xa >= p.mu, upper, _elu_like(xa, p.alpha)))


def terelu_dx(p: TereluParams, x: ArrayOrFloat) -> ArrayOrFloat:
    xa = np.asarray(x, dtype=np.float64)
    f = np.asarray(terelu_forward(p, xa))
    out = np.where(
        xa <= 0,
        f + p.alpha,
        np.where(xa < p.mu, 1.0, -f + p.beta * p.mu + p.beta),
    )
    return _out(x, out)


def act_dbeta(p: TereluParams, x: ArrayOrFloat) -> ArrayOrFloat:
    """Derivative of TERELU with respect to beta (zero below ``mu``)."""
    xa = np.asarray(x, dtype=np.float64)
    upper = p.mu - np.expm1(np.minimum(p.mu - xa, 0.0))
    return _out(x, np.where(xa >= p.mu, upper, 0.0))


def terelu_fused(p: TereluParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward value, input derivative and beta-derivative in one pass.

    A single ``expm1`` serves both exponential branches (the argument is
    ``x`` below zero and ``min(mu - x, 0)`` elsewhere, which is 0 on the
    linear branch). The derivative is formed from the output exactly as
    ``f + alpha`` / ``1`` / ``-f + beta*mu + beta``.
    """
    low = x <= 0
    high = x >= p.mu
    e = np.expm1(np.where(low, x, np.minimum(p.mu - x, 0.0)))
    upper = p.mu - e
    y = np.where(high, p.beta * upper, np.where(low, p.alpha * e, x))
    dx = np.where(low, y + p.alpha, np.where(high, -y + p.beta * p.mu + p.beta, 1.0))
    dbeta = np.where(high, upper, 0.0)
    return y, dx, dbeta


def terelu_saturation(p: TereluParams) -> float:
    """Asymptote ``beta * (mu + 1)`` approached as ``x -> inf``."""
    return p.beta * (p.mu + 1.0)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def act_forward(spec: ActivationSpec, x: ArrayOrFloat) -> ArrayOrFloat:
    k, p = spec.kind, spec.params
    xa = np.asarray(x, dtype=np.float64)
    if k is Kind.TERELU:
        return terelu_forward(p, x)
    if k is Kind.RELU:
        y = np.where(xa > 0, xa, 0.0)
    elif k is Kind.LRELU:
        y = np.where(xa > 0, xa, p.alpha * xa)
    elif k is Kind.ELU:
        y = _elu_like(xa, p.alpha)
    elif k is Kind.SRELU:
        y = np.where(
            xa >= p.t_r,
            p.t_r + p.a_r * (xa - p.t_r),
            np.where(xa <= p.t_l, p.t_l + p.a_l * (xa - p.t_l), xa),
        )
    elif k is Kind.APL:
        y = np.maximum(xa, 0.0)
        for a, b in zip(p.a, p.b):
            y = y + a * np.maximum(0.0, -xa + b)
    elif k is Kind.SOFTPLUS:
        y = p.alpha * _softplus(p.beta * xa)
    elif k is Kind.TANH:
        y = np.tanh(xa)
    else:  # pragma: no cover
        raise ValueError(k)
    return _out(x, y)


def act_dx(spec: ActivationSpec, x: ArrayOrFloat) -> ArrayOrFloat:
    """Derivative with respect to the input.

    At kinks the branch chosen by ``act_forward``'s boundary convention is
    used, so e.g. ReLU has slope 0 at 0 and ELU/TERELU use the exponential
    branch at 0.
    """
    k, p = spec.kind, spec.params
    xa = np.asarray(x, dtype=np.float64)
    if k is Kind.TERELU:
        return terelu_dx(p, x)
    if k is Kind.RELU:
        d = np.where(xa > 0, 1.0, 0.0)
    elif k is Kind.LRELU:
        d = np.where(xa > 0, 1.0, p.alpha)
    elif k is Kind.ELU:
        d = np.where(xa <= 0, _elu_like(xa, p.alpha) + p.alpha, 1.0)
    elif k is Kind.SRELU:
        d = np.where(xa >= p.t_r, p.a_r, np.where(xa <= p.t_l, p.a_l, 1.0))
    elif k is Kind.APL:
        d = np.where(xa > 0, 1.0, 0.0)
        for a, b in zip(p.a, p.b):
            d = d - a * np.where(-xa + b > 0, 1.0, 0.0)
    elif k is Kind.SOFTPLUS:
        d = p.alpha * p.beta * _sigmoid(p.beta * xa)
    elif k is Kind.TANH:
        d = 1.0 - np.tanh(xa) ** 2
    else:  # pragma: no cover
        raise ValueError(k)
    return _out(x, d)


def branch_points(spec: ActivationSpec) -> tuple[float, ...]:
    """Inputs where the activation (or its derivative) is not smooth."""
    k, p = spec.kind, spec.params
    if k in (Kind.RELU, Kind.LRELU, Kind.ELU):
        return (0.0,)
    if k is Kind.TERELU:
        return (0.0, p.mu)
    if k is Kind.SRELU:
        return (p.t_l, p.t_r)
    if k is Kind.APL:
        return (0.0,) + tuple(p.b)
    return ()


def branch_labels(spec: ActivationSpec, x: np.ndarray) -> np.ndarray:
    """Name of the formula branch each input falls in (for per-branch reports)."""
    k, p = spec.kind, spec.params
    x = np.asarray(x, dtype=np.float64)
    if k is Kind.TERELU:
        return np.where(x <= 0, "x<=0", np.where(x < p.mu, "0<x<mu", "x>=mu"))
    if k is Kind.SRELU:
        return np.where(x >= p.t_r, "x>=t_r", np.where(x <= p.t_l, "x<=t_l", "middle"))
    if k in (Kind.RELU, Kind.LRELU, Kind.ELU):
        return np.where(x <= 0, "x<=0", "x>0")
    if k is Kind.APL:
        return np.array([f"segment{int(np.sum(v > np.asarray(p.b)))}" for v in x.ravel()])
    return np.full(x.shape, "all")


DEFAULT_SPECS: dict[Kind, ActivationSpec] = {k: ActivationSpec(k) for k in Kind}
