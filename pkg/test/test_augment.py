# coding=utf-8

import numpy as np
import pytest

from respiclass.cycle_data import CycleLabel
from respiclass.errors import EmptyClassError
from respiclass.processing import augment


def test_one_hot():
    np.testing.assert_array_equal(augment.one_hot(CycleLabel.BOTH),
            [0, 0, 1, 0])
    np.testing.assert_array_equal(augment.one_hot_matrix([3, 0]),
            [[0, 0, 0, 1], [1, 0, 0, 0]])


def test_mixup_pair_conserves_mass(rng):
    for _ in range(1000):
        x1 = rng.random((8, 16))
        x2 = rng.random((8, 16))
        y1 = augment.one_hot(rng.integers(4), np.float64)
        y2 = augment.one_hot(rng.integers(4), np.float64)
        gamma = augment.MixupDraw.draw(rng).gamma

        (xa, ya), (xb, yb) = augment.mixup_pair(x1, y1, x2, y2, gamma)

        np.testing.assert_allclose(xa + xb, x1 + x2, atol=1e-6)
        np.testing.assert_allclose(ya + yb, y1 + y2, atol=1e-6)
        assert abs(ya.sum() - 1.0) < 1e-6 and abs(yb.sum() - 1.0) < 1e-6
        assert np.all(ya >= 0) and np.all(yb >= 0)


def test_mixup_pair_of_identical_items(rng):
    x = rng.random((4, 4))
    y = augment.one_hot(1, np.float64)
    for gamma in (0.0, 0.3, 1.0):
        (xa, ya), (xb, yb) = augment.mixup_pair(x, y, x, y, gamma)
        np.testing.assert_allclose(xa, x)
        np.testing.assert_allclose(xb, x)
        np.testing.assert_allclose(ya, y)


def test_mixup_pair_extremes(rng):
    x1, x2 = rng.random((2, 3, 3))
    (xa, _), (xb, _) = augment.mixup_pair(x1, [1, 0, 0, 0], x2, [0, 1, 0, 0],
            1.0)
    np.testing.assert_array_equal(xa, x1)
    np.testing.assert_array_equal(xb, x2)
    with pytest.raises(ValueError):
        augment.mixup_pair(x1, [1, 0, 0, 0], x2, [0, 1, 0, 0], 1.5)


def test_mixup_draw(rng):
    draws = [augment.MixupDraw.draw(rng, 0.4).gamma for _ in range(500)]
    assert min(draws) >= 0.0 and max(draws) <= 1.0
    # Beta(0.4, 0.4) puts most of its mass near 0 and 1.
    assert np.mean([d < 0.1 or d > 0.9 for d in draws]) > 0.4
    with pytest.raises(ValueError):
        augment.MixupDraw.draw(rng, 0.0)


@pytest.mark.parametrize('batch_size', [2, 5, 50])
def test_mixup_batch(batch_size):
    x = np.random.default_rng(1).random((batch_size, 4, 6)).astype(
            np.float32)
    y = augment.one_hot_matrix(np.arange(batch_size) % 4)

    xm, ym = augment.mixup_batch(x, y, np.random.default_rng(7), 0.4)
    assert xm.shape == x.shape and ym.shape == y.shape
    assert xm.dtype == np.float32
    np.testing.assert_allclose(ym.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(xm >= -1e-6) and np.all(xm <= 1 + 1e-6)

    again = augment.mixup_batch(x, y, np.random.default_rng(7), 0.4)
    np.testing.assert_array_equal(again[0], xm)
    np.testing.assert_array_equal(again[1], ym)


def test_mixup_batch_even_conserves_mass():
    x = np.random.default_rng(2).random((10, 3))
    y = augment.one_hot_matrix(np.arange(10) % 4, np.float64)
    xm, ym = augment.mixup_batch(x, y, np.random.default_rng(3), 0.4)
    np.testing.assert_allclose(xm.sum(axis=0), x.sum(axis=0), atol=1e-9)
    np.testing.assert_allclose(ym.sum(axis=0), y.sum(axis=0), atol=1e-9)


def test_oversample_indices_balances_classes():
    labels = [3] * 10 + [0] * 4 + [1] * 2 + [2] * 1
    index = augment.oversample_indices(labels, seed=5)

    np.testing.assert_array_equal(index[:17], np.arange(17))
    counts = np.bincount(np.asarray(labels)[index], minlength=4)
    np.testing.assert_array_equal(counts, [10, 10, 10, 10])
    np.testing.assert_array_equal(index,
            augment.oversample_indices(labels, seed=5))


def test_oversample_balance_keeps_originals():
    items = [(np.full(2, i), augment.one_hot(label))
             for i, label in enumerate([3, 3, 3, 0, 1, 2])]
    balanced = augment.oversample_balance(items, seed=0)
    assert len(balanced) == 12
    assert all(a is b for a, b in zip(balanced[:6], items))
    labels = [int(np.argmax(y)) for _, y in balanced]
    assert np.bincount(labels).tolist() == [3, 3, 3, 3]


def test_oversample_empty_class():
    with pytest.raises(EmptyClassError) as info:
        augment.oversample_indices([0, 1, 3, 3], seed=0)
    assert 'Both' in str(info.value)


def test_batch_bounds():
    assert augment.batch_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert augment.batch_bounds(9, 4) == [(0, 4), (4, 9)]
    assert augment.batch_bounds(1, 4) == [(0, 1)]


def _epoch(seed, epoch, alpha=0.4):
    x = np.arange(23, dtype=np.float32).reshape(23, 1)
    y = augment.one_hot_matrix(np.arange(23) % 4)
    return list(augment.iter_batches(x, y, 5, seed, epoch,
            mixup_alpha=alpha))


def test_iter_batches_is_deterministic():
    first = _epoch(3, 1)
    second = _epoch(3, 1)
    assert len(first) == 5
    for (b1, x1, y1), (b2, x2, y2) in zip(first, second):
        assert b1 == b2
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)

    other = _epoch(3, 2)
    assert not all(np.array_equal(a[1], b[1]) for a, b in zip(first, other))


def test_iter_batches_covers_every_item_once():
    batches = _epoch(0, 1, alpha=None)
    seen = np.concatenate([xb[:, 0] for _, xb, _ in batches])
    np.testing.assert_array_equal(np.sort(seen), np.arange(23))


def test_prefetcher_keeps_order():
    batches = _epoch(4, 1)
    for depth in (0, 1, 3):
        prefetched = list(augment.Prefetcher(iter(_epoch(4, 1)), depth))
        assert len(prefetched) == len(batches)
        for (_, x1, y1), (_, x2, y2) in zip(batches, prefetched):
            np.testing.assert_array_equal(x1, x2)
            np.testing.assert_array_equal(y1, y2)


def test_prefetcher_raises_producer_errors():

    def failing():
        yield 1
        raise RuntimeError('broken batch')

    consumed = []
    with pytest.raises(RuntimeError):
        for item in augment.Prefetcher(failing(), 2):
            consumed.append(item)
    assert consumed == [1]
