# coding=utf-8

"""
Finite difference gradient checks for the layers and losses.

A layer with an array valued output is reduced to a scalar with a random
projection r: f(x) = sum(r * layer(x)). The gradient of f with respect to x
(or a parameter) is what backward(r) computes.
"""

import numpy as np

from .layers import Dropout, Sequential


def relative_error(analytic, numeric):
    """Norm-wise relative error ||a - n|| / max(||a||, ||n||)."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-30)
    return float(np.linalg.norm(analytic - numeric) / scale)


def finite_diff_gradcheck(func, point, analytic, h=1e-3, indices=None):
    """Compares an analytic gradient to central differences.

    Args:
        func (callable): Scalar function of an array shaped like point. It is
            called with point modified in place, so it must not keep
            references to its argument.
        point (array): The check point. Restored on return.
        analytic (array): The analytic gradient of func at point.
        h (float): The finite difference step.
        indices (array): Optional flat indices to check. Defaults to all.

    Returns:
        The norm-wise relative error over the checked entries.
    """

    flat = point.reshape(-1)
    analytic = np.asarray(analytic).reshape(-1)
    if indices is None:
        indices = np.arange(flat.shape[0])

    numeric = np.zeros(len(indices))
    for k, i in enumerate(indices):
        original = flat[i]
        flat[i] = original + h
        plus_value = flat[i]
        f_plus = func(point)
        flat[i] = original - h
        minus_value = flat[i]
        f_minus = func(point)
        flat[i] = original
        # The step actually taken after rounding to the array dtype.
        step = float(plus_value) - float(minus_value)
        numeric[k] = (f_plus - f_minus) / step

    return relative_error(analytic[indices], numeric)


def _reset_dropout(layer):
    if isinstance(layer, Dropout):
        layer.reset(layer.seed)
    elif isinstance(layer, Sequential):
        for sublayer in layer.dropout_layers():
            sublayer.reset(sublayer.seed)


def check_layer(layer, x, rng, h=1e-3, train=False, param_set=None,
                param_name=None, max_checks=None):
    """Gradient check of a layer with respect to its input or a parameter.

    Args:
        layer (Layer): The layer to check.
        x (array): The input batch.
        rng (Generator): Draws the projection and the checked entries.
        h (float): The finite difference step.
        train (bool): Run the layer in training mode. Dropout masks are
            replayed from the layer seed for every evaluation.
        param_set (ParamSet): Needed when param_name is given.
        param_name (str): Check this parameter instead of the input.
        max_checks (int): Check at most this many random entries.

    Returns:
        The norm-wise relative error.
    """

    _reset_dropout(layer)
    out = layer.forward(x, train=train)
    projection = rng.standard_normal(out.shape)

    def scalar(_):
        _reset_dropout(layer)
        return float(np.sum(projection * layer.forward(x, train=train),
                dtype=np.float64))

    _reset_dropout(layer)
    if param_set is not None:
        param_set.zero_grad()
    layer.forward(x, train=train)
    grad_x = layer.backward(projection.astype(out.dtype))

    if param_name is None:
        point = x
        analytic = grad_x
    else:
        point = param_set.params[param_name]
        analytic = param_set.grads[param_name].copy()

    indices = None
    if max_checks is not None and point.size > max_checks:
        indices = rng.choice(point.size, size=max_checks, replace=False)

    return finite_diff_gradcheck(scalar, point, analytic, h=h,
            indices=indices)


def check_loss(loss, y, prediction, h=1e-3, max_checks=None, rng=None):
    """Gradient check of a loss(y, prediction) -> (value, grad) function
    with respect to the prediction."""

    _, analytic = loss(y, prediction)

    indices = None
    if max_checks is not None and prediction.size > max_checks:
        indices = rng.choice(prediction.size, size=max_checks, replace=False)

    return finite_diff_gradcheck(lambda p: loss(y, p)[0], prediction,
            analytic, h=h, indices=indices)
