# coding=utf-8

import numpy as np
import pytest

from respiclass.cycle_data import GamPatch, make_cycle_id
from respiclass.errors import ConfigError, ShapeError
from respiclass.models.architectures import (AutoencoderClassifier,
                                             CdnnModel, EncoderDecoderModel,
                                             MlpHead, ModelConfig,
                                             cycle_probabilities)
from respiclass.models.training import (TrainConfig, TrainingLog,
                                        extract_embeddings, holdout_split,
                                        make_validator, train_autoencoder,
                                        train_cdnn, train_mlp_head)
from respiclass.neural.checkpoint_file import (read_checkpoint,
                                               write_checkpoint)

PATCH = (16, 32)


def small_config(dtype=np.float32):
    return ModelConfig(patch_shape=PATCH, conv_channels=(4, 8, 8, 16),
            dense_units=16, decoder_channels=(8, 8, 4, 4, 1), mlp_units=16,
            dtype=dtype)


def striped_patches(n_per_class, seed):
    """Horizontal lines, vertical lines, a grid and plain noise."""

    rng = np.random.default_rng(seed)
    rows = (np.arange(PATCH[0]) % 2 == 0)[:, np.newaxis]
    cols = (np.arange(PATCH[1]) % 2 == 0)[np.newaxis, :]
    patterns = [np.broadcast_to(rows, PATCH), np.broadcast_to(cols, PATCH),
                rows | cols, np.zeros(PATCH, dtype=bool)]

    x, labels = [], []
    for label, pattern in enumerate(patterns):
        for _ in range(n_per_class):
            x.append(0.8 * pattern + 0.2 * rng.random(PATCH))
            labels.append(label)

    return np.array(x, dtype=np.float32), np.array(labels)


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(conv_channels=(4, 8, 16))
    with pytest.raises(ValueError):
        ModelConfig(decoder_channels=(8, 8, 4, 4, 2))
    with pytest.raises(ShapeError):
        EncoderDecoderModel(ModelConfig(patch_shape=(20, 32)))


def test_output_shapes(rng):
    config = small_config()
    x = rng.random((3,) + PATCH).astype(np.float32)

    probs = CdnnModel(config).predict(x)
    assert probs.shape == (3, 4)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-5)

    autoencoder = EncoderDecoderModel(config)
    embeddings = autoencoder.embed(x)
    assert embeddings.shape == (3, 16)
    assert autoencoder.reconstruct(x).shape == (3,) + PATCH
    assert np.all(autoencoder.reconstruct(x) >= 0)

    head = MlpHead(config)
    assert head.predict(embeddings).shape == (3, 4)
    assert AutoencoderClassifier(autoencoder, head).predict(x).shape == (3, 4)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=1)
    with pytest.raises(ConfigError):
        TrainConfig(validation_fraction=1.0)


def test_cdnn_learns_separable_patches():
    x, labels = striped_patches(12, seed=0)
    cfg = TrainConfig(lr=3e-3, batch_size=8, epochs=40, mixup=False,
            oversample=False, prefetch=0)

    model, training_log = train_cdnn(x, labels, cfg, small_config())

    assert len(training_log) == 40
    accuracy = np.mean(np.argmax(model.predict(x), axis=1) == labels)
    assert accuracy >= 0.95
    assert training_log.losses[-1] < training_log.losses[0]


def test_autoencoder_reduces_reconstruction_error():
    x, _ = striped_patches(4, seed=1)
    x = 0.5 + 0.25 * x
    cfg = TrainConfig(lr=3e-3, batch_size=4, epochs=50, prefetch=0)

    model, training_log = train_autoencoder(x, cfg, small_config())

    assert len(training_log) == 50
    assert training_log.losses[-1] <= 0.5 * training_log.losses[0]
    assert all(np.isnan(acc) for acc in training_log.accuracies)


def test_mlp_head_learns_separable_embeddings(rng):
    centers = 3.0 * np.eye(4, 16)
    labels = np.repeat(np.arange(4), 20)
    embeddings = centers[labels] + 0.3 * rng.standard_normal((80, 16))
    cfg = TrainConfig(lr=1e-3, batch_size=8, epochs=40, mixup=False,
            oversample=False)

    head, _ = train_mlp_head(embeddings.astype(np.float32), labels, cfg,
            small_config())

    accuracy = np.mean(np.argmax(head.predict(embeddings), axis=1) == labels)
    assert accuracy >= 0.99


def test_mlp_head_rejects_wrong_embedding_width():
    with pytest.raises(ShapeError):
        train_mlp_head(np.zeros((8, 5), dtype=np.float32),
                np.arange(8) % 4, TrainConfig(epochs=1), small_config())


def test_training_is_deterministic():
    x, labels = striped_patches(3, seed=2)
    labels[:2] = 3

    def run(seed):
        cfg = TrainConfig(lr=1e-3, batch_size=4, epochs=2, seed=seed)
        return train_cdnn(x, labels, cfg, small_config())

    first, first_log = run(7)
    second, second_log = run(7)
    assert first.params.digest() == second.params.digest()
    assert first_log.rows == second_log.rows

    other, _ = run(8)
    assert other.params.digest() != first.params.digest()


def test_training_rejects_empty_input():
    with pytest.raises(ShapeError):
        train_cdnn(np.zeros((0,) + PATCH, dtype=np.float32), np.zeros(0),
                TrainConfig(epochs=1), small_config())


def test_keep_best_restores_the_best_epoch():
    x, labels = striped_patches(2, seed=3)
    scores = iter([0.1, 0.9, 0.2])
    digests = []

    def validate(model):
        digests.append(model.params.digest())
        return next(scores)

    cfg = TrainConfig(lr=1e-3, batch_size=4, epochs=3, keep_best=True)
    model, _ = train_cdnn(x, labels, cfg, small_config(), validate=validate)

    assert len(digests) == 3
    assert model.params.digest() == digests[1]


def test_cycle_probabilities(rng):
    model = CdnnModel(small_config())
    patches = [GamPatch(rng.random(PATCH), 'r#0', i) for i in range(3)]

    expected = model.predict(np.stack([p.values for p in patches])).mean(
            axis=0)
    probs = cycle_probabilities(model, patches)
    assert probs.dtype == np.float64
    np.testing.assert_allclose(probs, expected, rtol=1e-6)
    assert abs(probs.sum() - 1.0) < 1e-5

    with pytest.raises(ShapeError):
        cycle_probabilities(model, [])


def test_holdout_split():
    cycle_ids = [make_cycle_id('%d_rec' % (100 + r), c)
                 for r in range(10) for c in range(3)]
    held = holdout_split(cycle_ids, 0.2, seed=4)

    assert held.sum() == 6
    for r in range(10):
        assert len(set(held[3 * r:3 * r + 3])) == 1
    np.testing.assert_array_equal(held, holdout_split(cycle_ids, 0.2, 4))

    with pytest.raises(ShapeError):
        holdout_split(['101_a#0', '101_a#1'], 0.5, seed=0)


class _FixedModel(object):

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=np.float32)

    def predict(self, x):
        return self.probs[:len(x)]


def test_make_validator():
    cycle_ids = ['a#0', 'a#0', 'b#0', 'c#0']
    labels = [0, 0, 3, 1]
    validate = make_validator(np.zeros((4, 2)), cycle_ids, labels)

    # a#0 averages to Crackle, b#0 is Normal, c#0 is wrongly Normal.
    model = _FixedModel([[0.7, 0.1, 0.1, 0.1], [0.3, 0.2, 0.2, 0.3],
                         [0.1, 0.1, 0.1, 0.7], [0.1, 0.2, 0.1, 0.6]])
    assert abs(validate(model) - 0.75) < 1e-12

    normal_only = make_validator(np.zeros((2, 2)), ['a#0', 'b#0'], [3, 3])
    assert normal_only(_FixedModel([[0.1, 0.1, 0.1, 0.7],
            [0.7, 0.1, 0.1, 0.1]])) == 0.5


def test_training_log_csv(tmp_path):
    training_log = TrainingLog()
    training_log.append(1, 1.5, 0.25)
    training_log.append(2, 0.75)
    filename = str(tmp_path / 'cdnn_log.csv')
    training_log.write_csv(filename, ['seed=0', 'train.epochs=2'])

    with open(filename) as fid:
        assert fid.readline() == '# seed=0\n'
    restored = TrainingLog.read_csv(filename)
    assert restored.losses == [1.5, 0.75]
    assert restored.accuracies[0] == 0.25
    assert np.isnan(restored.accuracies[1])


def test_model_checkpoints(tmp_path, rng):
    config = small_config()
    x = rng.random((2,) + PATCH).astype(np.float32)

    cdnn = CdnnModel(config, seed=1)
    write_checkpoint(str(tmp_path / 'cdnn.rspm'), cdnn.checkpoint())
    restored = CdnnModel(config, seed=2)
    restored.load_checkpoint(read_checkpoint(str(tmp_path / 'cdnn.rspm')))
    np.testing.assert_array_equal(restored.predict(x), cdnn.predict(x))

    autoencoder = EncoderDecoderModel(config, seed=1)
    encoder, decoder = autoencoder.checkpoints()
    other = EncoderDecoderModel(config, seed=2)
    other.load_checkpoints(encoder, decoder)
    np.testing.assert_array_equal(extract_embeddings(other, x),
            autoencoder.embed(x))
    np.testing.assert_array_equal(other.reconstruct(x),
            autoencoder.reconstruct(x))


def test_cycle_probabilities_average_patch_vectors():
    model = _FixedModel([[0.8, 0.2, 0.0, 0.0], [0.6, 0.4, 0.0, 0.0]])
    np.testing.assert_allclose(cycle_probabilities(model,
            [np.zeros(PATCH)] * 2), [0.7, 0.3, 0.0, 0.0], atol=1e-7)
    np.testing.assert_allclose(cycle_probabilities(model, [np.zeros(PATCH)]),
            [0.8, 0.2, 0.0, 0.0], atol=1e-7)


def test_cdnn_and_encoder_share_block_shapes():
    config = small_config()
    cdnn = CdnnModel(config)
    encoder = EncoderDecoderModel(config).encoder_params
    for name, value in encoder.params.items():
        assert cdnn.params[name].shape == value.shape
    assert [n for n in cdnn.params.params if n.startswith('block')] == \
            list(encoder.params)


def test_mlp_training_leaves_the_encoder_unchanged(rng):
    config = small_config()
    x, labels = striped_patches(2, seed=5)
    autoencoder = EncoderDecoderModel(config, seed=1)
    digest = autoencoder.encoder_params.digest()

    embeddings = extract_embeddings(autoencoder, x)
    train_mlp_head(embeddings, labels, TrainConfig(lr=1e-3, batch_size=4,
            epochs=2), config)
    assert autoencoder.encoder_params.digest() == digest


def test_training_rejects_a_single_item():
    x = np.full((1,) + PATCH, 0.5, dtype=np.float32)
    cfg = TrainConfig(epochs=1, mixup=False, oversample=False)

    with pytest.raises(ShapeError, match='at least 2'):
        train_autoencoder(x, cfg, small_config())
    with pytest.raises(ShapeError, match='at least 2'):
        train_cdnn(x, np.array([3]), cfg, small_config())
    with pytest.raises(ShapeError, match='at least 2'):
        train_mlp_head(np.zeros((1, 16), dtype=np.float32), np.array([3]),
                cfg, small_config())


def test_trailing_single_item_batch_is_merged():
    x, _ = striped_patches(2, seed=6)
    x = np.concatenate([x, x[:1]])
    cfg = TrainConfig(batch_size=4, epochs=1, prefetch=0)

    _, training_log = train_autoencoder(x, cfg, small_config())
    assert len(training_log) == 1
