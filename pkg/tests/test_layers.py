import copy

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from terelu.activations import DEFAULT_SPECS, ActivationSpec, Kind, branch_points
from terelu.gradcheck import check_layer, sample_away_from
from terelu.layers import Activation, BatchNorm, Dense, LayerStateError, Maxout
from terelu.numerics import Rng, ShapeError


def m(rows):
    return np.array(rows, dtype=np.float64)


# Dense ---------------------------------------------------------------------

def test_dense_forward_examples():
    d = Dense(2, 2)
    d.W[...] = np.eye(2)
    np.testing.assert_array_equal(d.forward(m([[3, 4]])), m([[3, 4]]))

    d = Dense(3, 2)
    d.b[...] = [[1, 2]]
    np.testing.assert_array_equal(d.forward(Rng(0).normal(4, 3)), np.tile([[1, 2]], (4, 1)))

    d = Dense(2, 1)
    d.W[...] = [[1], [1]]
    np.testing.assert_array_equal(d.forward(m([[2, 3]])), m([[5]]))


def test_dense_shape_errors():
    d = Dense(3, 2)
    with pytest.raises(ShapeError):
        d.forward(np.zeros((4, 2)))
    d.forward(np.zeros((4, 3)))
    with pytest.raises(ShapeError):
        d.backward(np.zeros((4, 3)))


def test_dense_backward_examples():
    d = Dense(3, 2, Rng(1), 1.0)
    x = Rng(2).normal(4, 3)
    d.forward(x)
    down = d.backward(np.zeros((4, 2)))
    assert not down.any() and not d.grad_W.any() and not d.grad_b.any()

    d = Dense(2, 2)
    d.W[...] = np.eye(2)
    d.forward(m([[1, -1]]))
    np.testing.assert_array_equal(d.backward(m([[0.5, 2]])), m([[0.5, 2]]))


def test_dense_backward_gradcheck():
    reports = check_layer(Dense(3, 2, Rng(3), 1.0), Rng(4).normal(5, 3), Rng(5), tol=1e-6)
    assert all(r.passed for r in reports), [r.line() for r in reports]


@pytest.mark.parametrize("layer", [Dense(2, 2), BatchNorm(2), Activation(DEFAULT_SPECS[Kind.TERELU]),
                                   Maxout(2, 2, 2)])
def test_backward_without_forward(layer):
    with pytest.raises(LayerStateError):
        copy.deepcopy(layer).backward(np.zeros((3, 2)))


# BatchNorm -----------------------------------------------------------------

def test_batchnorm_constant_column_gives_delta():
    bn = BatchNorm(2)
    bn.delta[...] = [[0.5, -2]]
    out = bn.forward(m([[3, 1], [3, 2], [3, 3]]))
    np.testing.assert_allclose(out[:, 0], 0.5)


def test_batchnorm_already_normalized_input():
    x = m([[-1], [1], [-1], [1]])  # mean 0, biased var 1
    np.testing.assert_allclose(BatchNorm(1).forward(x), x, atol=1e-2)


def test_batchnorm_two_point_column():
    out = BatchNorm(1).forward(m([[0], [2]]))
    np.testing.assert_allclose(out, [[-1], [1]], atol=1e-2)
    np.testing.assert_allclose(out, [[-1 / np.sqrt(1 + 1e-5)], [1 / np.sqrt(1 + 1e-5)]], rtol=1e-14)


def test_batchnorm_needs_two_rows_in_training():
    with pytest.raises(ValueError):
        BatchNorm(3).forward(np.zeros((1, 3)))
    BatchNorm(3).forward(np.zeros((1, 3)), training=False)


def test_batchnorm_running_stats_only_in_training():
    bn = BatchNorm(2, momentum=0.9)
    x = m([[0, 10], [2, 30]])
    bn.forward(x, training=False)
    np.testing.assert_array_equal(bn.running_mean, [[0, 0]])
    bn.forward(x, training=True)
    np.testing.assert_allclose(bn.running_mean, [[0.1, 2.0]])
    np.testing.assert_allclose(bn.running_var, [[0.9 + 0.1 * 1, 0.9 + 0.1 * 100]])


def test_batchnorm_eval_uses_running_stats():
    bn = BatchNorm(1)
    bn.running_mean[...] = 2.0
    bn.running_var[...] = 4.0 - 1e-5
    np.testing.assert_allclose(bn.forward(m([[4], [0]]), training=False), [[1], [-1]])
    with pytest.raises(LayerStateError):
        bn.backward(np.ones((2, 1)))


def test_batchnorm_backward_properties():
    bn = BatchNorm(3)
    bn.gamma[...] = [[1.5, -0.5, 2.0]]
    x = Rng(6).normal(6, 3, 2.0)
    bn.forward(x)
    assert not bn.backward(np.zeros((6, 3))).any()
    assert not bn.grad_gamma.any() and not bn.grad_delta.any()
    down = bn.backward(Rng(7).normal(6, 3))
    assert np.max(np.abs(down.sum(axis=0))) < 1e-9


def test_batchnorm_backward_gradcheck():
    bn = BatchNorm(3)
    bn.gamma[...] = [[1.2, 0.7, -1.1]]
    bn.delta[...] = [[0.1, -0.3, 0.0]]
    reports = check_layer(bn, Rng(8).normal(4, 3, 1.5), Rng(9), tol=1e-5)
    assert all(r.passed for r in reports), [r.line() for r in reports]


def test_batchnorm_output_statistics():
    x = Rng(10).normal(64, 64, 3.0) + 5.0
    out = BatchNorm(64).forward(x)
    assert np.max(np.abs(out.mean(axis=0))) < 1e-9
    assert np.max(np.abs(out.var(axis=0) - 1)) < 1e-3


# Activation ----------------------------------------------------------------

def test_activation_layer_forward():
    out = Activation(DEFAULT_SPECS[Kind.TERELU]).forward(m([[-1, 0.5, 2]]))
    np.testing.assert_allclose(out, [[np.exp(-1) - 1, 0.5, 2 - np.exp(-1)]], rtol=1e-15)
    assert not Activation(DEFAULT_SPECS[Kind.RELU]).forward(-np.ones((2, 3))).any()
    assert not Activation(DEFAULT_SPECS[Kind.TANH]).forward(np.zeros((2, 3))).any()


def test_activation_backward_linear_region():
    layer = Activation(DEFAULT_SPECS[Kind.TERELU])
    layer.forward(Rng(1).uniform(0.01, 0.99, (3, 4)))
    up = np.ones((3, 4))
    np.testing.assert_array_equal(layer.backward(up), up)
    assert layer.grad_beta[0, 0] == 0.0


def test_activation_beta_gradient_single_entry():
    layer = Activation(DEFAULT_SPECS[Kind.TERELU])
    layer.forward(m([[1.0]]))
    layer.backward(m([[1.0]]))
    assert layer.grad_beta[0, 0] == 1.0


@pytest.mark.parametrize("kind", list(Kind))
def test_activation_layer_gradcheck(kind):
    spec = DEFAULT_SPECS[kind]
    x = sample_away_from(branch_points(spec), 20, Rng(13)).reshape(4, 5)
    reports = check_layer(Activation(spec), x, Rng(14), tol=1e-6)
    assert all(r.passed for r in reports), [r.line() for r in reports]


def test_activation_gradcheck_with_trained_beta():
    spec = ActivationSpec.of("terelu", alpha=0.7, beta=1.8, mu=0.6)
    x = sample_away_from(branch_points(spec), 30, Rng(15)).reshape(5, 6)
    reports = check_layer(Activation(spec), x, Rng(16), tol=1e-6)
    assert all(r.passed for r in reports), [r.line() for r in reports]


def test_nonpositive_beta_warns_once(caplog):
    layer = Activation(DEFAULT_SPECS[Kind.TERELU])
    layer.beta[...] = -0.1
    layer.forward(np.ones((2, 2)) * 3)
    layer.forward(np.ones((2, 2)) * 3)
    assert sum("beta" in r.message for r in caplog.records) == 1


# Maxout --------------------------------------------------------------------

def abs_maxout():
    mx = Maxout(1, 1, 2)
    mx.W[0][...] = 1.0
    mx.W[1][...] = -1.0
    return mx


def test_maxout_abs_configuration():
    mx = Maxout(2, 2, 2)
    mx.W[0][...] = np.eye(2)
    mx.W[1][...] = -np.eye(2)
    np.testing.assert_array_equal(mx.forward(m([[3, -2]])), m([[3, 2]]))

    mx = abs_maxout()
    mx.forward(m([[3]]))
    np.testing.assert_array_equal(mx.backward(m([[1]])), m([[1]]))
    assert mx.grad_W[1][0, 0] == 0.0 and mx.grad_b[1][0, 0] == 0.0


def test_maxout_identical_pieces_and_constants():
    mx = Maxout(3, 2, 3, Rng(0), 1.0)
    for p in range(1, 3):
        mx.W[p][...] = mx.W[0]
    x = Rng(1).normal(4, 3)
    np.testing.assert_array_equal(mx.forward(x), x @ mx.W[0])
    assert (mx.cache_argmax == 0).all()  # ties resolve to the lowest piece

    mx = Maxout(2, 1, 2)
    mx.b[1][...] = 10.0
    np.testing.assert_array_equal(mx.forward(Rng(2).normal(5, 2)), np.full((5, 1), 10.0))


def test_maxout_losing_pieces_get_zero_grad():
    mx = Maxout(2, 3, 2, Rng(3), 1.0)
    mx.b[0][...] = 100.0
    mx.forward(Rng(4).normal(4, 2))
    mx.backward(Rng(5).normal(4, 3))
    assert not mx.grad_W[1].any() and not mx.grad_b[1].any()
    assert mx.grad_b[0].any()


def test_maxout_gradcheck():
    reports = check_layer(Maxout(3, 4, 3, Rng(6), 1.0), Rng(7).normal(5, 3), Rng(8), tol=1e-6)
    assert all(r.passed for r in reports), [r.line() for r in reports]


def test_maxout_rejects_single_piece():
    with pytest.raises(ValueError):
        Maxout(2, 2, 1)


# params() ------------------------------------------------------------------

def test_layer_params_exposure():
    assert Activation(DEFAULT_SPECS[Kind.RELU]).params() == []
    (beta, grad), = Activation(DEFAULT_SPECS[Kind.TERELU]).params()
    assert beta.shape == (1, 1) and grad.shape == (1, 1)
    shapes = [(p.shape, g.shape) for p, g in Dense(3, 2).params()]
    assert shapes == [((3, 2), (3, 2)), ((1, 2), (1, 2))]
    assert len(BatchNorm(4).params()) == 2
    assert len(Maxout(3, 2, 4).params()) == 8


@pytest.mark.parametrize("make", [
    lambda: Dense(3, 2, Rng(0), 1.0),
    lambda: BatchNorm(3),
    lambda: Activation(DEFAULT_SPECS[Kind.TERELU]),
    lambda: Maxout(3, 3, 2, Rng(0), 1.0),
])
def test_params_are_live_views(make):
    layer = make()
    x = Rng(1).uniform(0.5, 3.0, (4, 3))
    before = layer.forward(x).copy()
    for p, _ in layer.params():
        p += 0.25
    assert not np.array_equal(layer.forward(x), before)


@pytest.mark.parametrize("make", [
    lambda: Dense(3, 2, Rng(0), 1.0),
    lambda: BatchNorm(3),
    lambda: Activation(DEFAULT_SPECS[Kind.ELU]),
    lambda: Maxout(3, 3, 2, Rng(0), 1.0),
])
def test_forward_is_repeatable(make):
    layer = make()
    x = Rng(2).normal(4, 3)
    np.testing.assert_array_equal(layer.forward(x), layer.forward(x))


shapes = st.integers(2, 5)


@settings(max_examples=25, deadline=None)
@given(shapes, shapes, shapes, st.sampled_from(["dense", "bn", "maxout"] + [k.value for k in Kind]),
       st.integers(0, 10_000))
def test_random_layer_gradcheck(batch, n_in, n_out, which, seed):
    rng = Rng(seed)
    if which == "dense":
        layer, x = Dense(n_in, n_out, rng, 1.0), rng.normal(batch, n_in)
    elif which == "bn":
        layer, x = BatchNorm(n_in), rng.normal(batch, n_in, 2.0)
        layer.gamma[...] = rng.normal(1, n_in)
    elif which == "maxout":
        layer, x = Maxout(n_in, n_out, 3, rng, 1.0), rng.normal(batch, n_in)
        z = np.stack([x @ W for W in layer.W])
        top2 = np.sort(z, axis=0)[-2:]
        assume(np.min(top2[1] - top2[0]) > 1e-3)  # away from ties
    else:
        spec = DEFAULT_SPECS[Kind(which)]
        layer = Activation(spec)
        x = sample_away_from(branch_points(spec), batch * n_in, rng).reshape(batch, n_in)
    reports = check_layer(layer, x, rng, tol=1e-5)
    assert all(r.passed for r in reports), [r.line() for r in reports]
