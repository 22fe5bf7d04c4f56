# coding=utf-8

"""
.. module:: respiclass.processing.augment

    :synopsis:  Class balancing and mixup augmentation of training items

    Items are (x, y) pairs where x is a patch (or an embedding vector) and y
    is a 4-class label distribution (a one-hot vector for unmixed items).

    All randomness is drawn from numpy Generators seeded from an explicit
    seed, the epoch and the batch number, so an epoch's augmented batches
    only depend on (seed, epoch) and not on how or when they are built.
"""

import logging
import queue
import threading

import numpy as np

from ..cycle_data import N_CLASSES, CycleLabel
from ..errors import EmptyClassError

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.4


def one_hot(label, dtype=np.float32):
    """Returns the one-hot label distribution of a CycleLabel (or int)."""
    y = np.zeros(N_CLASSES, dtype=dtype)
    y[int(label)] = 1.0
    return y


def one_hot_matrix(labels, dtype=np.float32):
    """Returns an [N, 4] one-hot matrix for a sequence of labels."""
    labels = np.asarray([int(label) for label in labels], dtype=np.intp)
    y = np.zeros((labels.shape[0], N_CLASSES), dtype=dtype)
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def epoch_rng(seed, epoch):
    return np.random.default_rng([int(seed), int(epoch)])


def batch_rng(seed, epoch, batch):
    return np.random.default_rng([int(seed), int(epoch), int(batch)])


class MixupDraw(object):
    """A mixing coefficient drawn from a symmetric Beta(alpha, alpha)."""

    def __init__(self, gamma, alpha):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError('gamma must be in [0, 1], got %r' % gamma)
        if alpha <= 0:
            raise ValueError('alpha must be positive, got %r' % alpha)
        self.gamma = float(gamma)
        self.alpha = float(alpha)


    @classmethod
    def draw(cls, rng, alpha=DEFAULT_ALPHA):
        if alpha <= 0:
            raise ValueError('alpha must be positive, got %r' % alpha)
        return cls(rng.beta(alpha, alpha), alpha)


    def __repr__(self):
        return 'MixupDraw(gamma=%r, alpha=%r)' % (self.gamma, self.alpha)


def oversample_indices(labels, seed):
    """Computes the indices of a class balanced resampling.

    Args:
        labels (sequence): The class (CycleLabel or int) of every item.
        seed (int): Seed for the duplicate selection.

    Returns:
        An index array starting with 0..len(labels)-1 (all originals, in
        order) followed by the added duplicates. Every class ends up with the
        count of the majority class.

    Raises:
        EmptyClassError: A class has no items.
    """

    labels = np.asarray([int(label) for label in labels], dtype=np.intp)
    counts = np.bincount(labels, minlength=N_CLASSES)
    for label in CycleLabel:
        if counts[label] == 0:
            raise EmptyClassError(label.display_name)

    target = counts.max()
    rng = np.random.default_rng(int(seed))
    extra = []
    for label in CycleLabel:
        deficit = target - counts[label]
        if deficit == 0:
            continue
        members = np.flatnonzero(labels == label)
        extra.append(members[rng.integers(0, members.shape[0], size=deficit)])
        log.debug('Oversampling %s: %d -> %d', label.display_name,
                counts[label], target)

    return np.concatenate([np.arange(labels.shape[0])] + extra)


def oversample_balance(items, seed):
    """Balances a list of (x, y) items by random oversampling.

    The class of an item is the argmax of its label distribution y. The
    original items are all kept, in order, and uniformly drawn duplicates of
    same-class items are appended until every class has as many items as the
    majority class.

    Returns:
        A new list of (x, y) items.
    """

    labels = [int(np.argmax(y)) for _, y in items]
    return [items[i] for i in oversample_indices(labels, seed)]


def mixup_pair(x1, y1, x2, y2, gamma):
    """Mixes two items with weight gamma.

    Returns:
        ((x_mp1, y_mp1), (x_mp2, y_mp2)) with
        x_mp1 = gamma * x1 + (1 - gamma) * x2 and
        x_mp2 = (1 - gamma) * x1 + gamma * x2, labels mixed the same way.
    """

    if not 0.0 <= gamma <= 1.0:
        raise ValueError('gamma must be in [0, 1], got %r' % gamma)
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    if x1.shape != x2.shape:
        raise ValueError('Cannot mix items of shape %r and %r' %
                (x1.shape, x2.shape))
    y1 = np.asarray(y1)
    y2 = np.asarray(y2)

    mixed_1 = (gamma * x1 + (1.0 - gamma) * x2,
               gamma * y1 + (1.0 - gamma) * y2)
    mixed_2 = ((1.0 - gamma) * x1 + gamma * x2,
               (1.0 - gamma) * y1 + gamma * y2)

    return mixed_1, mixed_2


def mixup_batch(x, y, rng, alpha=DEFAULT_ALPHA):
    """Replaces a batch by mixed items.

    The batch is shuffled and item i is paired with item (i + half) mod B,
    half = ceil(B / 2). Each pair gets its own gamma and both mixed outputs
    are kept: output i is the first mix of pair i and output i + half the
    second. The result has the batch size of the input.

    Args:
        x (array): [B, ...] inputs.
        y (array): [B, 4] label distributions.
        rng (Generator): The random generator of this batch.
        alpha (float): The Beta distribution parameter.

    Returns:
        The mixed (x, y) arrays.
    """

    n = x.shape[0]
    if n == 0:
        return x, y
    if alpha <= 0:
        raise ValueError('alpha must be positive, got %r' % alpha)

    order = rng.permutation(n)
    x = x[order]
    y = y[order]

    half = (n + 1) // 2
    first = np.arange(half)
    second = (first + half) % n
    gamma = rng.beta(alpha, alpha, size=half)

    gx = gamma.reshape((half,) + (1,) * (x.ndim - 1)).astype(x.dtype)
    gy = gamma.reshape(half, 1).astype(y.dtype)

    x_out = np.concatenate([gx * x[first] + (1 - gx) * x[second],
            (1 - gx) * x[first] + gx * x[second]])[:n]
    y_out = np.concatenate([gy * y[first] + (1 - gy) * y[second],
            (1 - gy) * y[first] + gy * y[second]])[:n]

    return x_out, y_out


def batch_bounds(n, batch_size):
    """Returns the (start, stop) item ranges of the batches of an epoch.

    A trailing batch of a single item is merged into the previous batch.
    """
    bounds = [(start, min(start + batch_size, n))
              for start in range(0, n, batch_size)]
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        bounds[-2:] = [(bounds[-2][0], n)]
    return bounds


def iter_batches(x, y, batch_size, seed, epoch, mixup_alpha=None,
                 shuffle=True, index=None):
    """Yields the (batch index, x, y) batches of one training epoch.

    The item order is a permutation drawn from (seed, epoch). When
    mixup_alpha is given each batch is mixed with a generator seeded from
    (seed, epoch, batch index).

    Args:
        index (array): Optional item indices into x and y making up the
            epoch (for example from oversample_indices). Defaults to all
            items once.
    """

    if index is None:
        index = np.arange(x.shape[0])
    n = index.shape[0]
    if shuffle:
        order = index[epoch_rng(seed, epoch).permutation(n)]
    else:
        order = index

    for batch, (start, stop) in enumerate(batch_bounds(n, batch_size)):
        items = order[start:stop]
        xb = x[items]
        yb = y[items]
        if mixup_alpha is not None:
            xb, yb = mixup_batch(xb, yb, batch_rng(seed, epoch, batch),
                    mixup_alpha)
        yield batch, xb, yb


class Prefetcher(object):
    """Runs a batch generator ahead of its consumer in a background thread.

    At most depth items are buffered. The items and their order are those
    of the wrapped iterable, so prefetching never changes what the consumer
    sees. Exceptions raised by the producer are re-raised in the consumer.
    A depth of 0 iterates the source directly.
    """

    _DONE = object()

    def __init__(self, source, depth=2):

        self.source = source
        self.depth = int(depth)
        self._queue = None
        self._stop = threading.Event()
        self._thread = None


    def _produce(self):
        try:
            for item in self.source:
                if not self._put(item):
                    return
            self._put(Prefetcher._DONE)
        except BaseException as e:
            self._put(e)


    def _put(self, item):
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False


    def __iter__(self):

        if self.depth <= 0:
            yield from self.source
            return

        self._queue = queue.Queue(maxsize=self.depth)
        self._stop.clear()
        self._thread = threading.Thread(target=self._produce, daemon=True)
        self._thread.start()
        try:
            while True:
                item = self._queue.get()
                if item is Prefetcher._DONE:
                    break
                if isinstance(item, BaseException):
                    raise item
                yield item
        finally:
            self._stop.set()
            self._thread.join()
