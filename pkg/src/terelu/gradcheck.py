"""Finite-difference gradient oracle and the checks built on it.

The oracle only ever calls forward functions; it never touches backward code,
so it stays independent of what it verifies.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

import numpy as np

from terelu import activations as act
from terelu.activations import ActivationSpec, Kind
from terelu.layers import Layer
from terelu.network import Model, softmax_xent
from terelu.numerics import Rng


class NonFiniteError(ArithmeticError):
    pass


@dataclass
class GradReport:
    name: str
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.name:<44} {self.max_rel_err:10.3e}  tol {self.tolerance:.0e}  {status}"
                f"  worst@{self.worst_index} analytic={self.analytic:.6g} numeric={self.numeric:.6g}")


def rel_err(analytic, numeric) -> np.ndarray:
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    return np.abs(a - n) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))


def central_diff(f: Callable[[np.ndarray], float], point, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    x = np.array(point, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"f is non-finite when perturbing component {i}: {fp}, {fm}")
        grad[i] = (fp - fm) / (2 * h)
    return grad


def _report(name, analytic, numeric, tol) -> GradReport:
    analytic = np.asarray(analytic, float)
    numeric = np.asarray(numeric, float)
    if analytic.shape != numeric.shape:
        raise ValueError(f"analytic {analytic.shape} vs numeric {numeric.shape}")
    if analytic.size == 0:
        return GradReport(name, 0.0, (), 0.0, 0.0, tol)
    err = rel_err(analytic, numeric)
    worst = np.unravel_index(int(np.argmax(err)), err.shape)
    return GradReport(name, float(err[worst]), tuple(int(i) for i in worst),
                      float(analytic[worst]), float(numeric[worst]), tol)


def check_gradient(f, analytic_grad, point, h: float = 1e-6, tol: float = 1e-6,
                   name: str = "gradient") -> GradReport:
    """Compare an analytic gradient (array, or callable of the point) with central differences."""
    point = np.asarray(point, dtype=np.float64)
    analytic = analytic_grad(point) if callable(analytic_grad) else analytic_grad
    return _report(name, analytic, central_diff(f, point, h), tol)


def check_elementwise(f, df, xs, h: float = 1e-6, tol: float = 1e-6,
                      name: str = "elementwise") -> GradReport:
    """Derivative check for a function applied independently to each entry of ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    numeric = (np.asarray(f(xs + h)) - np.asarray(f(xs - h))) / (2 * h)
    if not np.all(np.isfinite(numeric)):
        bad = np.flatnonzero(~np.isfinite(numeric))[0]
        raise NonFiniteError(f"non-finite difference at component {bad}")
    return _report(name, df(xs), numeric, tol)


def sample_away_from(points, n: int, rng: Rng, low: float = -6.0, high: float = 6.0,
                     radius: float = 1e-3) -> np.ndarray:
    """``n`` uniform samples in ``[low, high]`` at least ``radius`` from every kink."""
    kinks = np.asarray(points, float)
    out = np.empty(0)
    while out.size < n:
        draw = rng.uniform(low, high, n)
        if kinks.size:
            draw = draw[np.min(np.abs(draw[:, None] - kinks[None, :]), axis=1) > radius]
        out = np.concatenate([out, draw])
    return out[:n]


def check_activation(spec: ActivationSpec, xs: np.ndarray, h: float = 1e-6,
                     tol: float = 1e-6) -> GradReport:
    return check_elementwise(lambda x: act.act_forward(spec, x), lambda x: act.act_dx(spec, x),
                             xs, h, tol, name=f"act_dx[{spec.kind.value}]")


def check_beta(params: act.TereluParams, xs: np.ndarray, h: float = 1e-6,
               tol: float = 1e-6) -> GradReport:
    """act_dbeta against central differences over beta, at each fixed x."""
    def f_of_beta(beta):
        return act.terelu_forward(act.TereluParams(params.alpha, float(beta), params.mu), xs)

    numeric = (f_of_beta(params.beta + h) - f_of_beta(params.beta - h)) / (2 * h)
    return _report("act_dbeta[terelu]", act.act_dbeta(params, xs), numeric, tol)


def check_layer(layer: Layer, x: np.ndarray, rng: Rng, h: float = 1e-6, tol: float = 1e-5,
                name: str | None = None, training: bool = True) -> list[GradReport]:
    """Check a layer's input and parameter gradients.

    The scalar under test is ``sum(forward(x) * w)`` for a fixed random ``w``,
    so the upstream gradient passed to backward is exactly ``w``.
    """
    name = name or repr(layer)
    out = layer.forward(x, training)
    w = rng.normal(*out.shape, 1.0)
    dx = layer.backward(w)
    analytic_params = [g.copy() for _, g in layer.params()]
    probe = copy.deepcopy(layer)

    def loss_of_input(xp):
        return float(np.sum(probe.forward(xp, training) * w))

    reports = [check_gradient(loss_of_input, dx, x, h, tol, name=f"{name} d/dx")]
    for i, ((p, _), ga) in enumerate(zip(probe.params(), analytic_params)):
        def loss_of_param(pp, p=p):
            saved = p.copy()
            p[...] = pp
            val = float(np.sum(probe.forward(x, training) * w))
            p[...] = saved
            return val

        reports.append(check_gradient(loss_of_param, ga, p.copy(), h, tol,
                                      name=f"{name} param{i}{tuple(p.shape)}"))
    return reports


def check_model(model: Model, x: np.ndarray, y: np.ndarray, h: float = 1e-6, tol: float = 1e-4,
                name: str = "model") -> list[GradReport]:
    """Every parameter of ``model`` against differences of the training-mode batch loss.

    Perturbations run on a deep copy, so the model passed in is left as it was
    after one forward/backward.
    """
    logits = model.forward(x, training=True)
    _, grad = softmax_xent(logits, y)
    model.backward(grad)
    analytic = [g.copy() for _, g in model.params()]
    probe = copy.deepcopy(model)

    reports = []
    for i, ((p, _), ga) in enumerate(zip(probe.params(), analytic)):
        def loss_of_param(pp, p=p):
            saved = p.copy()
            p[...] = pp
            val = softmax_xent(probe.forward(x, training=True), y)[0]
            p[...] = saved
            return val

        reports.append(check_gradient(loss_of_param, ga, p.copy(), h, tol,
                                      name=f"{name} param{i}{tuple(p.shape)}"))
    return reports


def per_branch(spec: ActivationSpec, xs: np.ndarray, h: float = 1e-6) -> dict[str, float]:
    """Worst relative derivative error within each branch of the activation."""
    numeric = (np.asarray(act.act_forward(spec, xs + h))
               - np.asarray(act.act_forward(spec, xs - h))) / (2 * h)
    err = rel_err(act.act_dx(spec, xs), numeric)
    labels = act.branch_labels(spec, xs)
    return {str(lab): float(err[labels == lab].max()) for lab in np.unique(labels)}


def _blob_batch(rng: Rng, n: int, dim: int, classes: int) -> tuple[np.ndarray, np.ndarray]:
    x = rng.normal(n, dim, 1.0)
    y = np.arange(n) % classes
    return x, y


def run_suite(kinds=None, points: int = 200, seed: int = 0) -> list[GradReport]:
    """Activation, beta, layer and end-to-end model checks at their declared tolerances."""
    from terelu.layers import Activation, BatchNorm, Dense, Maxout
    from terelu.network import build_fcnn, build_maxout_net

    kinds = list(Kind) if kinds is None else [Kind(k) for k in kinds]
    full = len(kinds) == len(Kind)
    rng = Rng(seed)
    reports: list[GradReport] = []
    for kind in kinds:
        spec = act.DEFAULT_SPECS[kind]
        xs = sample_away_from(act.branch_points(spec), points, rng)
        reports.append(check_activation(spec, xs))
        if kind is Kind.TERELU:
            reports.append(check_beta(spec.params, xs))

    for kind in kinds:
        spec = act.DEFAULT_SPECS[kind]
        x = sample_away_from(act.branch_points(spec), 20, rng).reshape(4, 5)
        reports += check_layer(Activation(spec), x, rng, name=f"Activation[{kind.value}]")
    if full:
        reports += check_layer(Dense(3, 2, rng, 1.0), rng.normal(4, 3, 1.0), rng, name="Dense")
        reports += check_layer(BatchNorm(3), rng.normal(4, 3, 1.0), rng, name="BatchNorm")
        reports += check_layer(Maxout(3, 2, 3, rng, 1.0), rng.normal(4, 3, 1.0), rng,
                               name="Maxout")

    for kind in kinds:
        spec = act.DEFAULT_SPECS[kind]
        x, y = _blob_batch(rng, 8, 2, 2)
        model = build_fcnn(1, 3, 2, 2, spec, use_bn=False, seed=seed)
        reports += check_model(model, x, y, tol=1e-4, name=f"model[{kind.value}]")
        model = build_fcnn(1, 3, 2, 2, spec, use_bn=True, seed=seed)
        reports += check_model(model, x, y, tol=1e-3, name=f"model+bn[{kind.value}]")
    if full:
        x, y = _blob_batch(rng, 8, 2, 2)
        reports += check_model(build_maxout_net(1, 3, 2, 2, 2, use_bn=False, seed=seed), x, y,
                               tol=1e-4, name="model[maxout]")
    return reports
