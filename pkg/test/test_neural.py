# coding=utf-8

import numpy as np
import pytest

from respiclass.errors import (CheckpointError, NonFiniteGradientError,
                               ShapeError)
from respiclass.neural.checkpoint_file import (ArchTag, ModelCheckpoint,
                                               read_checkpoint,
                                               write_checkpoint)
from respiclass.neural.gradcheck import check_layer, check_loss
from respiclass.neural.layers import (BatchNorm, Conv2d, Dense, Dropout,
                                      GlobalMaxPool, MaxPool2x2, ReLU,
                                      Reshape, Sequential, Softmax,
                                      TransposedConv2d, conv2d,
                                      conv2d_stride2, softmax,
                                      transposed_conv2d)
from respiclass.neural.losses import LossConfig, kl_divergence_loss, mse_loss
from respiclass.neural.optimizer import Adam
from respiclass.neural.params import ParamSet

SEEDS = range(5)
H = 1e-5
TOLERANCE = 1e-5


def _separated(rng, shape):
    """Distinct values at least 0.1 apart, none near zero."""
    values = (np.arange(int(np.prod(shape))) + 1) * 0.1
    values = rng.permutation(values) * rng.choice([-1.0, 1.0],
            size=values.shape)
    return values.reshape(shape)


@pytest.mark.parametrize('seed', SEEDS)
def test_conv2d_gradients(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float64)
    layer = Conv2d(params, 'conv', 3, 4, rng)
    params.params['conv.bias'][...] = rng.standard_normal(4)
    x = rng.standard_normal((2, 5, 6, 3))

    assert check_layer(layer, x, rng, h=H) < TOLERANCE
    for name in ('conv.weight', 'conv.bias'):
        assert check_layer(layer, x, rng, h=H, param_set=params,
                param_name=name) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_transposed_conv2d_gradients(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float64)
    layer = TransposedConv2d(params, 'deconv', 3, 2, rng)
    x = rng.standard_normal((2, 3, 4, 3))

    assert layer.forward(x).shape == (2, 6, 8, 2)
    assert check_layer(layer, x, rng, h=H) < TOLERANCE
    for name in ('deconv.weight', 'deconv.bias'):
        assert check_layer(layer, x, rng, h=H, param_set=params,
                param_name=name) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
@pytest.mark.parametrize('train', [True, False])
def test_batchnorm_gradients(seed, train):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float64)
    layer = BatchNorm(params, 'bn', 3)
    params.params['bn.gamma'][...] = rng.uniform(0.5, 1.5, 3)
    params.params['bn.beta'][...] = rng.standard_normal(3)
    params.state['bn.running_mean'][...] = rng.standard_normal(3)
    x = rng.standard_normal((4, 3, 2, 3)) * 2.0 + 1.0

    assert check_layer(layer, x, rng, h=H, train=train) < TOLERANCE
    for name in ('bn.gamma', 'bn.beta'):
        assert check_layer(layer, x, rng, h=H, train=train,
                param_set=params, param_name=name) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_dense_gradients(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float64)
    layer = Dense(params, 'fc', 5, 4, rng)
    x = rng.standard_normal((3, 5))

    assert check_layer(layer, x, rng, h=H) < TOLERANCE
    for name in ('fc.weight', 'fc.bias'):
        assert check_layer(layer, x, rng, h=H, param_set=params,
                param_name=name) < TOLERANCE


def test_dense_gradients_in_single_precision():
    rng = np.random.default_rng(11)
    params = ParamSet(np.float32)
    layer = Dense(params, 'fc', 3, 2, rng)
    x = rng.standard_normal((2, 3)).astype(np.float32)

    assert check_layer(layer, x, rng, h=1e-2) < 1e-3
    assert check_layer(layer, x, rng, h=1e-2, param_set=params,
            param_name='fc.weight') < 1e-3


@pytest.mark.parametrize('seed', SEEDS)
@pytest.mark.parametrize('layer_class, shape', [
    (ReLU, (2, 3, 4, 2)),
    (MaxPool2x2, (2, 4, 6, 2)),
    (MaxPool2x2, (2, 5, 3, 2)),
    (GlobalMaxPool, (3, 3, 4, 2))])
def test_piecewise_linear_gradients(seed, layer_class, shape):
    rng = np.random.default_rng(seed)
    x = _separated(rng, shape)
    assert check_layer(layer_class(), x, rng, h=H) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_softmax_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((4, 4)) * 3.0
    assert check_layer(Softmax(), x, rng, h=H) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_dropout_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, 8))
    assert check_layer(Dropout(0.5, seed=seed), x, rng, h=H,
            train=True) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_sequential_gradients(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float64)
    net = Sequential([Conv2d(params, 'conv', 1, 2, rng),
                      BatchNorm(params, 'bn', 2),
                      Reshape((4 * 4 * 2,)),
                      Dropout(0.25, seed=seed),
                      Dense(params, 'fc', 32, 4, rng),
                      Softmax()])
    x = rng.standard_normal((3, 4, 4, 1))

    assert check_layer(net, x, rng, h=H, train=True) < TOLERANCE
    assert check_layer(net, x, rng, h=H, train=True, param_set=params,
            param_name='conv.weight', max_checks=10) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_kl_divergence_gradient(seed):
    rng = np.random.default_rng(seed)
    y = softmax(rng.standard_normal((4, 4)) * 2.0)
    y[0] = [0.0, 1.0, 0.0, 0.0]
    prediction = softmax(rng.standard_normal((4, 4)))

    def loss(target, p):
        return kl_divergence_loss(target, p, check_normalized=False)

    assert check_loss(loss, y, prediction, h=H) < TOLERANCE


@pytest.mark.parametrize('seed', SEEDS)
def test_mse_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((2, 3, 4, 1))
    xhat = rng.random((2, 3, 4, 1))
    assert check_loss(mse_loss, x, xhat, h=H) < TOLERANCE


def test_kl_divergence_values():
    uniform = np.full((2, 4), 0.25)
    loss, _ = kl_divergence_loss(uniform, uniform,
            cfg=LossConfig(lambda_l2=0))
    assert abs(loss) < 1e-12

    y = np.array([[0.0, 0.0, 0.0, 1.0]])
    loss, grad = kl_divergence_loss(y, np.full((1, 4), 0.25))
    assert abs(loss - np.log(4.0)) < 1e-9
    np.testing.assert_allclose(grad, [[0, 0, 0, -4.0]])

    with pytest.raises(ValueError):
        kl_divergence_loss(y, np.full((1, 4), 0.3))
    with pytest.raises(ShapeError):
        kl_divergence_loss(y, np.full((1, 3), 1.0 / 3))


def test_kl_divergence_clipped_entries_have_no_gradient():
    cfg = LossConfig(lambda_l2=0, epsilon_prob=1e-7)
    y = np.array([[0.5, 0.5, 0.0, 0.0]])
    yhat = np.array([[0.0, 0.5, 0.25, 0.25]])

    loss, grad = kl_divergence_loss(y, yhat, cfg=cfg)
    expected = 0.5 * np.log(0.5 / 1e-7) + 0.5 * np.log(0.5 / 0.5)
    assert abs(loss - expected) < 1e-9
    np.testing.assert_allclose(grad, [[0.0, -1.0, 0.0, 0.0]])

    # The loss does not move when the clipped entry moves below epsilon.
    nudged = yhat.copy()
    nudged[0, 0] = 5e-8
    assert kl_divergence_loss(y, nudged, cfg=cfg,
            check_normalized=False)[0] == loss


def test_kl_divergence_adds_weight_decay():
    rng = np.random.default_rng(0)
    params = ParamSet(np.float64)
    Dense(params, 'fc', 3, 2, rng)
    y = np.array([[0.5, 0.5, 0.0, 0.0]])
    yhat = np.full((1, 4), 0.25)

    base, _ = kl_divergence_loss(y, yhat, cfg=LossConfig(lambda_l2=0))
    loss, _ = kl_divergence_loss(y, yhat, params, LossConfig(lambda_l2=0.1))
    weight = params['fc.weight']
    assert abs(loss - base - 0.05 * np.sum(weight ** 2)) < 1e-12
    np.testing.assert_allclose(params.grads['fc.weight'], 0.1 * weight)
    np.testing.assert_array_equal(params.grads['fc.bias'], 0.0)


def test_mse_value():
    x = np.zeros((2, 2, 2, 1))
    loss, grad = mse_loss(x, np.ones((2, 2, 2, 1)))
    assert loss == 0.5
    np.testing.assert_allclose(grad, 1.0 / 8)


@pytest.mark.parametrize('seed', SEEDS)
def test_transposed_convolution_is_the_adjoint(seed):
    rng = np.random.default_rng(seed)
    kernel = rng.standard_normal((3, 3, 3, 5))
    x = rng.standard_normal((2, 6, 8, 3))
    y = rng.standard_normal((2, 3, 4, 5))

    forward = np.sum(conv2d_stride2(x, kernel) * y)
    adjoint = np.sum(x * transposed_conv2d(y, kernel))
    assert abs(forward - adjoint) <= 1e-5 * max(abs(forward), 1.0)


def test_conv2d_matches_direct_sum(rng):
    x = rng.standard_normal((1, 4, 5, 2))
    kernel = rng.standard_normal((3, 3, 2, 3))
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))

    expected = np.zeros((1, 4, 5, 3))
    for i in range(4):
        for j in range(5):
            for o in range(3):
                expected[0, i, j, o] = np.sum(padded[0, i:i + 3, j:j + 3, :] *
                        kernel[:, :, :, o])

    np.testing.assert_allclose(conv2d(x, kernel), expected, rtol=1e-10)
    np.testing.assert_allclose(conv2d(x[0], kernel), expected[0], rtol=1e-10)
    with pytest.raises(ShapeError):
        conv2d(x, np.zeros((3, 3, 4, 1)))


def test_softmax_shift_invariance(rng):
    x = rng.standard_normal((5, 4))
    for shift in (-3.0, 10.0, 1000.0):
        np.testing.assert_allclose(softmax(x + shift), softmax(x), atol=1e-6)
    np.testing.assert_allclose(softmax(x).sum(axis=1), 1.0)


def test_max_pool_ties_go_to_the_first_position():
    layer = MaxPool2x2()
    x = np.ones((1, 2, 2, 1))
    assert layer.forward(x).shape == (1, 1, 1, 1)
    grad = layer.backward(np.ones((1, 1, 1, 1)))
    np.testing.assert_array_equal(grad[0, :, :, 0], [[1, 0], [0, 0]])


def test_dropout_modes():
    x = np.ones((200, 50))
    layer = Dropout(0.5, seed=1)
    assert layer.forward(x, train=False) is x

    out = layer.forward(x, train=True)
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert abs(out.mean() - 1.0) < 0.05
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_batchnorm_needs_two_samples_in_training():
    params = ParamSet(np.float64)
    layer = BatchNorm(params, 'bn', 2)
    with pytest.raises(ShapeError):
        layer.forward(np.ones((1, 3, 3, 2)), train=True)
    layer.forward(np.ones((1, 3, 3, 2)), train=False)


def test_batchnorm_running_statistics():
    params = ParamSet(np.float64)
    layer = BatchNorm(params, 'bn', 1)
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1)
    layer.forward(x, train=True)
    np.testing.assert_allclose(params.state['bn.running_mean'], [0.25])
    np.testing.assert_allclose(params.state['bn.running_var'],
            [0.9 + 0.1 * np.var(x, ddof=1)])


def test_adam_first_step_is_bias_corrected():
    params = ParamSet(np.float64)
    params.add('w', [1.0, 1.0, 1.0])
    params.grads['w'][...] = [0.5, -2.0, 3.0]

    Adam(lr=0.01).step(params)
    assert params.adam_step == 1
    np.testing.assert_allclose(params['w'], [0.99, 1.01, 0.99], atol=1e-9)


def test_adam_rejects_non_finite_gradients():
    params = ParamSet(np.float64)
    params.add('a', [1.0, 2.0])
    params.add('b', [3.0])
    params.grads['b'][...] = np.nan

    with pytest.raises(NonFiniteGradientError) as info:
        Adam(lr=0.1).step(params)
    assert 'b' in str(info.value)
    np.testing.assert_array_equal(params['a'], [1.0, 2.0])
    assert params.adam_step == 0


def test_param_set():
    params = ParamSet(np.float64)
    params.add('w', np.ones((2, 2)), decay=True)
    params.add('b', np.ones(2))
    assert len(params) == 2
    assert params.n_values() == 6
    assert params.l2_norm_sq() == 4.0
    with pytest.raises(KeyError):
        params.add('w', np.ones(1))

    digest = params.digest()
    params.params['b'][0] = 2.0
    assert params.digest() != digest

    with pytest.raises(CheckpointError):
        params.load({'w': np.ones((2, 2))})
    with pytest.raises(CheckpointError):
        params.load({'w': np.ones((2, 3)), 'b': np.ones(2)})


def _small_model(seed):
    rng = np.random.default_rng(seed)
    params = ParamSet(np.float32)
    Conv2d(params, 'conv', 1, 2, rng)
    BatchNorm(params, 'bn', 2)
    Dense(params, 'fc', 4, 3, rng)
    return params


def test_checkpoint_round_trip(tmp_path):
    params = _small_model(0)
    for grad in params.grads.values():
        grad[...] = 0.1
    params.state['bn.running_var'][...] = 2.0
    Adam(lr=0.01).step(params)

    filename = str(tmp_path / 'cdnn.rspm')
    write_checkpoint(filename, ModelCheckpoint.from_param_set(ArchTag.CDNN,
            params))
    checkpoint = read_checkpoint(filename)
    assert checkpoint.architecture is ArchTag.CDNN

    restored = _small_model(1)
    assert restored.digest() != params.digest()
    checkpoint.apply_to(restored, ArchTag.CDNN)
    assert restored.digest() == params.digest()
    assert restored.adam_step == 1
    np.testing.assert_array_equal(restored.adam_m['fc.weight'],
            params.adam_m['fc.weight'])

    with pytest.raises(CheckpointError):
        checkpoint.apply_to(_small_model(1), ArchTag.MLP)


def test_checkpoint_errors(tmp_path):
    filename = str(tmp_path / 'model.rspm')
    write_checkpoint(filename, ModelCheckpoint.from_param_set(ArchTag.MLP,
            _small_model(0)))
    with open(filename, 'rb') as fid:
        data = fid.read()

    with pytest.raises(CheckpointError):
        read_checkpoint(str(tmp_path / 'missing.rspm'))

    with open(filename, 'wb') as fid:
        fid.write(b'XXXX' + data[4:])
    with pytest.raises(CheckpointError):
        read_checkpoint(filename)

    with open(filename, 'wb') as fid:
        fid.write(data[:-7])
    with pytest.raises(CheckpointError):
        read_checkpoint(filename)

    other = ParamSet(np.float32)
    Dense(other, 'fc', 5, 3, np.random.default_rng(0))
    checkpoint = ModelCheckpoint.from_param_set(ArchTag.MLP, _small_model(0))
    with pytest.raises(CheckpointError):
        checkpoint.apply_to(other)
