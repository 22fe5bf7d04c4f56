# coding=utf-8

"""
.. module:: respiclass.neural.layers

    :synopsis:  Trainable layers with exact backpropagation

    Activations are numpy arrays laid out [N, H, W, C] (images) or [N, D]
    (vectors). Every layer implements forward(x, train) and backward(grad).
    backward returns the gradient with respect to the layer input and adds
    the parameter gradients to the ParamSet gradient accumulators, so
    gradients of several backward passes sum until ParamSet.zero_grad is
    called.

    Convolutions are 3x3. The stride 1 convolution uses zero "same" padding.
    The transposed convolution is the adjoint of a stride 2 convolution with
    one pixel of zero padding and doubles both spatial dimensions.
"""

import numpy as np

from ..errors import ShapeError

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.9


def he_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_channels(x, channels, what):
    if x.ndim != 4 or x.shape[-1] != channels:
        raise ShapeError('%s expects [N, H, W, %d] input, got %r' %
                (what, channels, x.shape))


def conv2d(x, kernel, bias=None):
    """3x3 stride 1 "same" cross-correlation.

    Args:
        x (array): [N, H, W, Cin] input (a [H, W, Cin] input is treated as
            a batch of one).
        kernel (array): [3, 3, Cin, Cout].
        bias (array): Optional [Cout].

    Returns:
        [N, H, W, Cout] (or [H, W, Cout]) output.
    """

    squeeze = x.ndim == 3
    if squeeze:
        x = x[np.newaxis]
    _check_channels(x, kernel.shape[2], 'conv2d')
    if kernel.shape[:2] != (3, 3):
        raise ShapeError('conv2d expects a 3x3 kernel, got %r' %
                (kernel.shape,))

    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = _conv2d_padded(padded, kernel, bias)

    return out[0] if squeeze else out


def _conv2d_padded(padded, kernel, bias):
    height = padded.shape[1] - 2
    width = padded.shape[2] - 2
    out = np.zeros(padded.shape[:1] + (height, width, kernel.shape[3]),
            dtype=np.result_type(padded, kernel))
    for di in range(3):
        for dj in range(3):
            out += np.tensordot(padded[:, di:di + height, dj:dj + width, :],
                    kernel[di, dj], axes=([3], [0]))
    if bias is not None:
        out += bias

    return out


def conv2d_stride2(x, kernel):
    """3x3 stride 2 convolution with one pixel of zero padding.

    A [N, 2H, 2W, Cin] input gives a [N, H, W, Cout] output. Output pixel
    (i, j) covers input rows 2i-1..2i+1 and columns 2j-1..2j+1.
    """

    _check_channels(x, kernel.shape[2], 'conv2d_stride2')
    _, height, width, _ = x.shape
    out_height = (height + 1) // 2
    out_width = (width + 1) // 2
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))

    out = np.zeros((x.shape[0], out_height, out_width, kernel.shape[3]),
            dtype=np.result_type(x, kernel))
    for di in range(3):
        for dj in range(3):
            window = padded[:, di:di + 2 * out_height:2,
                    dj:dj + 2 * out_width:2, :]
            out += np.tensordot(window, kernel[di, dj], axes=([3], [0]))

    return out


def transposed_conv2d(y, kernel, bias=None):
    """3x3 stride 2 transposed convolution.

    This is the adjoint of conv2d_stride2: for any x and y,
    <conv2d_stride2(x, kernel), y> == <x, transposed_conv2d(y, kernel)>.

    Args:
        y (array): [N, H, W, Cin] input.
        kernel (array): [3, 3, Cout, Cin].
        bias (array): Optional [Cout].

    Returns:
        [N, 2H, 2W, Cout] output.
    """

    squeeze = y.ndim == 3
    if squeeze:
        y = y[np.newaxis]
    _check_channels(y, kernel.shape[3], 'transposed_conv2d')

    n, height, width, _ = y.shape
    padded = np.zeros((n, 2 * height + 2, 2 * width + 2, kernel.shape[2]),
            dtype=np.result_type(y, kernel))
    for di in range(3):
        for dj in range(3):
            padded[:, di:di + 2 * height:2, dj:dj + 2 * width:2, :] += \
                    np.tensordot(y, kernel[di, dj], axes=([3], [1]))
    out = padded[:, 1:2 * height + 1, 1:2 * width + 1, :]
    if bias is not None:
        out = out + bias

    return out[0] if squeeze else out


def dense(x, weights, bias=None):
    """Affine map x @ weights + bias over the last axis."""
    if x.shape[-1] != weights.shape[0]:
        raise ShapeError('dense expects input width %d, got %r' %
                (weights.shape[0], x.shape))
    out = x @ weights
    if bias is not None:
        out = out + bias
    return out


def softmax(x):
    """Softmax over the last axis, shifted by the row max."""
    shifted = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return shifted / np.sum(shifted, axis=-1, keepdims=True)


class Layer(object):
    """Base class. Layers without parameters ignore the ParamSet."""

    def __init__(self, name=''):
        self.name = name


    def forward(self, x, train=False):
        raise NotImplementedError


    def backward(self, grad):
        raise NotImplementedError


    def __call__(self, x, train=False):
        return self.forward(x, train=train)


    def __repr__(self):
        return '%s(%r)' % (self.__class__.__name__, self.name)


class Conv2d(Layer):

    def __init__(self, params, name, in_channels, out_channels, rng):
        Layer.__init__(self, name)
        self.params = params
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weight_name = name + '.weight'
        self.bias_name = name + '.bias'
        params.add(self.weight_name, he_uniform(rng, (3, 3, in_channels,
                out_channels), 9 * in_channels, params.dtype), decay=True)
        params.add(self.bias_name, np.zeros(out_channels))
        self._padded = None


    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.params.dtype)
        _check_channels(x, self.in_channels, self.name)
        self._padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        return _conv2d_padded(self._padded, self.params[self.weight_name],
                self.params[self.bias_name])


    def backward(self, grad):
        padded = self._padded
        kernel = self.params[self.weight_name]
        height = padded.shape[1] - 2
        width = padded.shape[2] - 2

        grad_kernel = self.params.grads[self.weight_name]
        grad_padded = np.zeros_like(padded)
        for di in range(3):
            for dj in range(3):
                window = padded[:, di:di + height, dj:dj + width, :]
                grad_kernel[di, dj] += np.tensordot(window, grad,
                        axes=([0, 1, 2], [0, 1, 2]))
                grad_padded[:, di:di + height, dj:dj + width, :] += \
                        np.tensordot(grad, kernel[di, dj], axes=([3], [1]))
        self.params.grads[self.bias_name] += grad.sum(axis=(0, 1, 2))

        return grad_padded[:, 1:-1, 1:-1, :]


class TransposedConv2d(Layer):

    def __init__(self, params, name, in_channels, out_channels, rng,
                 bias=True):
        Layer.__init__(self, name)
        self.params = params
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weight_name = name + '.weight'
        self.bias_name = name + '.bias' if bias else None
        params.add(self.weight_name, he_uniform(rng, (3, 3, out_channels,
                in_channels), 9 * in_channels, params.dtype), decay=True)
        if bias:
            params.add(self.bias_name, np.zeros(out_channels))
        self._input = None


    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.params.dtype)
        _check_channels(x, self.in_channels, self.name)
        self._input = x
        bias = self.params[self.bias_name] if self.bias_name else None
        return transposed_conv2d(x, self.params[self.weight_name], bias)


    def backward(self, grad):
        x = self._input
        kernel = self.params[self.weight_name]
        height, width = x.shape[1:3]

        padded = np.pad(grad, ((0, 0), (1, 1), (1, 1), (0, 0)))
        grad_kernel = self.params.grads[self.weight_name]
        for di in range(3):
            for dj in range(3):
                window = padded[:, di:di + 2 * height:2,
                        dj:dj + 2 * width:2, :]
                grad_kernel[di, dj] += np.tensordot(window, x,
                        axes=([0, 1, 2], [0, 1, 2]))
        if self.bias_name:
            self.params.grads[self.bias_name] += grad.sum(axis=(0, 1, 2))

        return conv2d_stride2(grad, kernel)


class BatchNorm(Layer):
    """Per-channel batch normalization over all but the last axis."""

    def __init__(self, params, name, channels, momentum=BATCHNORM_MOMENTUM,
                 eps=BATCHNORM_EPS):
        Layer.__init__(self, name)
        self.params = params
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma_name = name + '.gamma'
        self.beta_name = name + '.beta'
        self.mean_name = name + '.running_mean'
        self.var_name = name + '.running_var'
        params.add(self.gamma_name, np.ones(channels))
        params.add(self.beta_name, np.zeros(channels))
        params.add_state(self.mean_name, np.zeros(channels))
        params.add_state(self.var_name, np.ones(channels))
        self._cache = None


    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.params.dtype)
        if x.shape[-1] != self.channels:
            raise ShapeError('%s expects %d channels, got %r' % (self.name,
                    self.channels, x.shape))
        gamma = self.params[self.gamma_name]
        beta = self.params[self.beta_name]
        axes = tuple(range(x.ndim - 1))

        if train:
            if x.shape[0] < 2:
                raise ShapeError('%s: batch normalization in training mode '
                        'needs a batch of at least 2' % self.name)
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // self.channels
            running_mean = self.params.state[self.mean_name]
            running_var = self.params.state[self.var_name]
            running_mean *= self.momentum
            running_mean += (1.0 - self.momentum) * mean
            running_var *= self.momentum
            running_var += (1.0 - self.momentum) * var * count / (count - 1)
        else:
            mean = self.params.state[self.mean_name]
            var = self.params.state[self.var_name]

        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, train)

        return gamma * x_hat + beta


    def backward(self, grad):
        x_hat, inv_std, train = self._cache
        gamma = self.params[self.gamma_name]
        axes = tuple(range(grad.ndim - 1))

        self.params.grads[self.gamma_name] += np.sum(grad * x_hat, axis=axes)
        self.params.grads[self.beta_name] += np.sum(grad, axis=axes)

        grad_x_hat = grad * gamma
        if not train:
            return grad_x_hat * inv_std

        count = grad.size // self.channels
        return (inv_std / count) * (count * grad_x_hat -
                np.sum(grad_x_hat, axis=axes) -
                x_hat * np.sum(grad_x_hat * x_hat, axis=axes))


class MaxPool2x2(Layer):
    """2x2 max pooling. Odd sizes are padded at the bottom/right with -inf.

    Ties are resolved to the first position in row-major order.
    """

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError('%s expects [N, H, W, C] input, got %r' %
                    (self.name, x.shape))
        n, height, width, channels = x.shape
        pad_h = height % 2
        pad_w = width % 2
        if pad_h or pad_w:
            x = np.pad(x, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)),
                    constant_values=-np.inf)
        out_h = x.shape[1] // 2
        out_w = x.shape[2] // 2

        # [N, out_h, out_w, C, 4] with the 2x2 block in row-major order.
        blocks = x.reshape(n, out_h, 2, out_w, 2, channels)
        blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(n, out_h, out_w,
                channels, 4)
        self._argmax = np.argmax(blocks, axis=-1)
        self._shape = (x.shape, (height, width))

        return np.take_along_axis(blocks, self._argmax[..., np.newaxis],
                axis=-1)[..., 0]


    def backward(self, grad):
        padded_shape, (height, width) = self._shape
        n, out_h, out_w, channels = grad.shape

        blocks = np.zeros((n, out_h, out_w, channels, 4), dtype=grad.dtype)
        np.put_along_axis(blocks, self._argmax[..., np.newaxis],
                grad[..., np.newaxis], axis=-1)
        blocks = blocks.reshape(n, out_h, out_w, channels, 2, 2)
        grad_x = blocks.transpose(0, 1, 4, 2, 5, 3).reshape(padded_shape)

        return grad_x[:, :height, :width, :]


class GlobalMaxPool(Layer):
    """Max over all spatial positions per channel: [N, H, W, C] -> [N, C]."""

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError('%s expects [N, H, W, C] input, got %r' %
                    (self.name, x.shape))
        n, height, width, channels = x.shape
        flat = x.reshape(n, height * width, channels)
        self._argmax = np.argmax(flat, axis=1)
        self._shape = x.shape
        return np.take_along_axis(flat, self._argmax[:, np.newaxis, :],
                axis=1)[:, 0, :]


    def backward(self, grad):
        n, height, width, channels = self._shape
        flat = np.zeros((n, height * width, channels), dtype=grad.dtype)
        np.put_along_axis(flat, self._argmax[:, np.newaxis, :],
                grad[:, np.newaxis, :], axis=1)
        return flat.reshape(self._shape)


class Dense(Layer):

    def __init__(self, params, name, in_units, out_units, rng):
        Layer.__init__(self, name)
        self.params = params
        self.in_units = in_units
        self.out_units = out_units
        self.weight_name = name + '.weight'
        self.bias_name = name + '.bias'
        params.add(self.weight_name, he_uniform(rng, (in_units, out_units),
                in_units, params.dtype), decay=True)
        params.add(self.bias_name, np.zeros(out_units))
        self._input = None


    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.params.dtype)
        if x.ndim != 2 or x.shape[1] != self.in_units:
            raise ShapeError('%s expects [N, %d] input, got %r' % (self.name,
                    self.in_units, x.shape))
        self._input = x
        return dense(x, self.params[self.weight_name],
                self.params[self.bias_name])


    def backward(self, grad):
        self.params.grads[self.weight_name] += self._input.T @ grad
        self.params.grads[self.bias_name] += grad.sum(axis=0)
        return grad @ self.params[self.weight_name].T


class ReLU(Layer):

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype)


    def backward(self, grad):
        return grad * self._mask


class Softmax(Layer):
    """Softmax over the last axis."""

    def forward(self, x, train=False):
        self._output = softmax(x)
        return self._output


    def backward(self, grad):
        y = self._output
        return y * (grad - np.sum(grad * y, axis=-1, keepdims=True))


class Dropout(Layer):
    """Inverted dropout.

    In training mode each element is zeroed with probability rate and the
    survivors are scaled by 1 / (1 - rate). In inference mode (and for a rate
    of 0) the layer is the identity. Masks come from a generator seeded at
    construction, so a training run is reproducible from its seed.
    """

    def __init__(self, rate, seed=0, name=''):
        Layer.__init__(self, name)
        if not 0.0 <= rate < 1.0:
            raise ValueError('Dropout rate must be in [0, 1), got %r' % rate)
        self.rate = float(rate)
        self.reset(seed)


    def reset(self, seed):
        """Restarts the mask sequence from seed."""
        self.seed = seed
        self._rng = np.random.default_rng(seed)


    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._scale = None
            return x
        keep = self._rng.random(x.shape) >= self.rate
        self._scale = keep.astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * self._scale


    def backward(self, grad):
        if self._scale is None:
            return grad
        return grad * self._scale


class Reshape(Layer):
    """Reshapes each sample to shape (the batch axis is kept)."""

    def __init__(self, shape, name=''):
        Layer.__init__(self, name)
        self.shape = tuple(shape)


    def forward(self, x, train=False):
        self._input_shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)


    def backward(self, grad):
        return grad.reshape(self._input_shape)


class Sequential(Layer):
    """Runs layers in order."""

    def __init__(self, layers, name=''):
        Layer.__init__(self, name)
        self.layers = list(layers)


    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x


    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


    def dropout_layers(self):
        found = []
        for layer in self.layers:
            if isinstance(layer, Dropout):
                found.append(layer)
            elif isinstance(layer, Sequential):
                found.extend(layer.dropout_layers())
        return found


    def __len__(self):
        return len(self.layers)


    def __iter__(self):
        return iter(self.layers)
