# coding=utf-8

"""
Training losses.

Both losses return (loss, gradient with respect to the prediction). The
KL loss also adds the gradient of its L2 term to the ParamSet gradients.
"""

import numpy as np

from ..errors import ShapeError

# Tolerance on the row sums of predicted distributions.
NORMALIZATION_TOLERANCE = 1e-4


class LossConfig(object):
    """KL loss settings.

    Attributes:
        lambda_l2 (float): L2 regularization coefficient (0 disables).
        epsilon_prob (float): Predicted probabilities are clipped to
            [epsilon_prob, 1] before the log.
    """

    def __init__(self, lambda_l2=1e-4, epsilon_prob=1e-7):
        if lambda_l2 < 0:
            raise ValueError('lambda_l2 must not be negative')
        if epsilon_prob <= 0:
            raise ValueError('epsilon_prob must be positive')
        self.lambda_l2 = float(lambda_l2)
        self.epsilon_prob = float(epsilon_prob)


def kl_divergence_loss(y, yhat, params=None, cfg=None,
                       check_normalized=True):
    """KL divergence between label and predicted distributions plus L2.

    loss = sum over the batch of sum_k y_k * log(y_k / yhat_k)
           + lambda / 2 * ||theta||^2

    where theta are the ParamSet's weight decayed parameters (convolution
    and dense weights). Terms with y_k = 0 contribute 0.

    Args:
        y (array): [N, K] label distributions.
        yhat (array): [N, K] predicted distributions.
        params (ParamSet): Optional. Its decayed parameters enter the L2
            term and their gradients are accumulated.
        cfg (LossConfig): The loss settings.
        check_normalized (bool): Set to False to skip the row sum check
            (finite difference checks perturb single entries).

    Returns:
        (loss, grad) where grad is d loss / d yhat.

    Raises:
        ValueError: A row of yhat does not sum to 1.
    """

    if cfg is None:
        cfg = LossConfig()
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape:
        raise ShapeError('Label shape %r does not match prediction shape %r'
                % (y.shape, yhat.shape))

    row_sums = yhat.sum(axis=-1, dtype=np.float64)
    if check_normalized and \
            np.any(np.abs(row_sums - 1.0) > NORMALIZATION_TOLERANCE):
        raise ValueError('Predicted distributions must sum to 1 (found row '
                'sums in [%g, %g])' % (row_sums.min(), row_sums.max()))

    clipped = np.clip(yhat, cfg.epsilon_prob, 1.0)
    positive = y > 0
    safe_y = np.where(positive, y, 1.0)
    terms = np.where(positive, y * (np.log(safe_y) - np.log(clipped)), 0.0)
    loss = float(np.sum(terms, dtype=np.float64))
    # Clipped entries are constant in the loss, so they get no gradient.
    inside = (yhat >= cfg.epsilon_prob) & (yhat <= 1.0)
    grad = np.where(inside, -y / clipped, 0.0).astype(yhat.dtype)

    if params is not None and cfg.lambda_l2 > 0:
        loss += 0.5 * cfg.lambda_l2 * params.l2_norm_sq()
        for name in params.decay:
            params.grads[name] += cfg.lambda_l2 * params.params[name]

    return loss, grad


def mse_loss(x, xhat):
    """Reconstruction loss sum((x - xhat)^2) / (2 * N * pixels).

    The squared error is averaged over the pixels of each sample and halved
    and averaged over the batch of N samples.

    Returns:
        (loss, grad) where grad = (xhat - x) / (N * pixels).
    """

    x = np.asarray(x)
    xhat = np.asarray(xhat)
    if x.shape != xhat.shape:
        raise ShapeError('Target shape %r does not match reconstruction shape '
                '%r' % (x.shape, xhat.shape))

    n = x.shape[0]
    pixels = x.size // n
    diff = xhat - x
    loss = float(np.sum(np.square(diff, dtype=np.float64)) / (2.0 * n * pixels))

    return loss, (diff / (n * pixels)).astype(xhat.dtype)
