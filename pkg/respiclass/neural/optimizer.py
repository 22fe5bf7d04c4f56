# coding=utf-8

"""
Adam optimizer working on a ParamSet.

The moment estimates and the step count live in the ParamSet, so they are
saved and restored with the model checkpoint.
"""

import numpy as np

from ..errors import NonFiniteGradientError


class Adam(object):

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):

        if lr <= 0:
            raise ValueError('The learning rate must be positive')
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


    def step(self, params, grads=None):
        """Applies one bias corrected Adam update in place.

        Args:
            params (ParamSet): The parameters to update.
            grads (dict): Optional name -> gradient. Defaults to the
                ParamSet's accumulated gradients.

        Raises:
            NonFiniteGradientError: A gradient contains NaN or inf. No
                parameter is changed in that case.
        """

        if grads is None:
            grads = params.grads

        bad = [name for name in params.params
               if not np.all(np.isfinite(grads[name]))]
        if bad:
            raise NonFiniteGradientError('Non-finite gradient for %s' %
                    ', '.join(bad[:10]))

        params.adam_step += 1
        t = params.adam_step
        correction_1 = 1.0 - self.beta1 ** t
        correction_2 = 1.0 - self.beta2 ** t

        for name, value in params.params.items():
            g = grads[name]
            m = params.adam_m[name]
            v = params.adam_v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            value -= (self.lr * (m / correction_1) /
                    (np.sqrt(v / correction_2) + self.eps)).astype(value.dtype)


def adam_step(params, grads=None, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Applies a single Adam update to params and returns it."""
    Adam(lr, beta1, beta2, eps).step(params, grads)
    return params
