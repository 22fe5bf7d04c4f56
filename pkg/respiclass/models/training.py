# coding=utf-8

"""
.. module:: respiclass.models.training

    :synopsis:  Training loops for the C-DNN, the autoencoder and the MLP head

    All three trainers share one loop: per epoch the (optionally class
    balanced) training items are shuffled with a generator seeded from
    (seed, epoch), cut into batches, optionally mixed, and each batch does a
    forward pass, a backward pass and an Adam step. A training run is fully
    determined by its inputs, its TrainConfig and its seed.
"""

import logging
import math
from collections import OrderedDict

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..cycle_data import recording_of
from ..datasets.util.csv_header import read_csv_after_header
from ..errors import (ConfigError, ScoringError, ShapeError,
                      TrainingDivergedError)
from ..neural.losses import LossConfig, kl_divergence_loss, mse_loss
from ..neural.optimizer import Adam
from ..processing import augment
from ..processing import icbhi_score
from .architectures import CdnnModel, EncoderDecoderModel, MlpHead

log = logging.getLogger(__name__)


class TrainConfig(object):
    """Training settings.

    Attributes:
        lr (float): Adam learning rate.
        batch_size (int): Items per batch.
        epochs (int): Number of passes over the training items.
        lambda_l2 (float): L2 coefficient of the KL loss.
        seed (int): Seed for shuffling, oversampling, mixup and init.
        mixup (bool): Mix each training batch (classifiers only).
        mixup_alpha (float): Beta distribution parameter for mixup.
        oversample (bool): Balance the classes by random oversampling.
        keep_best (bool): Keep the parameters of the epoch with the best
            validation score instead of the last epoch's.
        validation_fraction (float): Share of the training recordings held
            out for keep_best.
        prefetch (int): Batches prepared ahead in a background thread.
        progress (bool): Show a tqdm progress bar.
    """

    def __init__(self, lr=1e-4, batch_size=50, epochs=100, lambda_l2=1e-4,
                 seed=0, mixup=True, mixup_alpha=augment.DEFAULT_ALPHA,
                 oversample=True, keep_best=False, validation_fraction=0.1,
                 prefetch=2, progress=False):

        self.lr = float(lr)
        self.batch_size = int(batch_size)
        self.epochs = int(epochs)
        self.lambda_l2 = float(lambda_l2)
        self.seed = int(seed)
        self.mixup = bool(mixup)
        self.mixup_alpha = float(mixup_alpha)
        self.oversample = bool(oversample)
        self.keep_best = bool(keep_best)
        self.validation_fraction = float(validation_fraction)
        self.prefetch = int(prefetch)
        self.progress = bool(progress)

        if self.epochs < 1:
            raise ConfigError('epochs must be at least 1, got %d' %
                    self.epochs)
        if self.lr <= 0:
            raise ConfigError('The learning rate must be positive')
        if self.batch_size < 2:
            raise ConfigError('batch_size must be at least 2')
        if self.lambda_l2 < 0:
            raise ConfigError('lambda_l2 must not be negative')
        if self.mixup_alpha <= 0:
            raise ConfigError('mixup alpha must be positive')
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError('validation_fraction must be in (0, 1)')
        if self.seed < 0:
            raise ConfigError('seed must not be negative')


class TrainingLog(object):
    """Per-epoch training loss and accuracy."""

    COLUMNS = ['epoch', 'loss', 'train_acc']

    def __init__(self):
        self.rows = []


    def append(self, epoch, loss, train_acc=None):
        self.rows.append((int(epoch), float(loss),
                float('nan') if train_acc is None else float(train_acc)))


    @property
    def losses(self):
        return [row[1] for row in self.rows]


    @property
    def accuracies(self):
        return [row[2] for row in self.rows]


    def to_frame(self):
        return pd.DataFrame(self.rows, columns=self.COLUMNS)


    def write_csv(self, filename, header_lines=()):
        with open(filename, 'w', encoding='utf-8', newline='') as fid:
            for line in header_lines:
                fid.write('# ' + line + '\n')
            self.to_frame().to_csv(fid, index=False, float_format='%.8g')


    @classmethod
    def read_csv(cls, filename):
        table = read_csv_after_header(filename)
        training_log = cls()
        for row in table.itertuples(index=False):
            training_log.append(row.epoch, row.loss,
                    None if pd.isna(row.train_acc) else row.train_acc)
        return training_log


    def __len__(self):
        return len(self.rows)


def holdout_split(cycle_ids, fraction, seed):
    """Picks a random share of the recordings as a validation holdout.

    Args:
        cycle_ids (list): The cycle id of every training item.
        fraction (float): Share of recordings to hold out (at least one).
        seed (int): Seed of the recording draw.

    Returns:
        A boolean array that is True for the items of held out recordings.
    """

    recordings = sorted(set(recording_of(cycle_id) for cycle_id in cycle_ids))
    if len(recordings) < 2:
        raise ShapeError('A validation holdout needs at least 2 recordings')
    n_holdout = min(max(1, int(round(fraction * len(recordings)))),
            len(recordings) - 1)
    rng = np.random.default_rng([seed, 99])
    chosen = set(recordings[i] for i in rng.choice(len(recordings),
            size=n_holdout, replace=False))

    return np.array([recording_of(cycle_id) in chosen
            for cycle_id in cycle_ids])


def make_validator(x, cycle_ids, labels):
    """Returns a callable scoring a model on held out items.

    The callable returns the ICBHI average score of the cycle level
    decisions, or the cycle accuracy when the holdout lacks anomalous or
    normal cycles.
    """

    groups = OrderedDict()
    for i, cycle_id in enumerate(cycle_ids):
        groups.setdefault(cycle_id, []).append(i)
    truth = OrderedDict((cycle_id, int(labels[rows[0]]))
            for cycle_id, rows in groups.items())

    def validate(model):
        probs = model.predict(x).astype(np.float64)
        predicted = [(cycle_id, icbhi_score.decide(probs[rows].mean(axis=0)))
                for cycle_id, rows in groups.items()]
        matrix = icbhi_score.confusion(predicted, list(truth.items()))
        try:
            return icbhi_score.icbhi_scores(matrix).as_score
        except ScoringError:
            return matrix.accuracy

    return validate


def _train_loop(name, models, param_sets, step, x, y, cfg, index=None,
                mixup=False, validate=None):
    """The shared epoch/batch loop.

    Args:
        name (str): Model name for log messages.
        models (list): The model objects (their param sets are snapshotted
            for keep_best).
        param_sets (list): The ParamSets updated by Adam.
        step (callable): step(xb, yb) runs forward and backward for one batch
            and returns (loss, n_correct or None).
        x, y (array): Training inputs and label distributions.
        cfg (TrainConfig): The training settings.
        index (array): Item indices making up an epoch.
        mixup (bool): Mix each batch.
        validate (callable): Scores the model after each epoch (keep_best).

    Returns:
        The TrainingLog.
    """

    optimizer = Adam(cfg.lr)
    training_log = TrainingLog()
    alpha = cfg.mixup_alpha if mixup else None
    n_items = x.shape[0] if index is None else index.shape[0]

    best_score = -np.inf
    best = None

    epochs = range(1, cfg.epochs + 1)
    if cfg.progress:
        epochs = tqdm(epochs, desc='train ' + name, unit='epoch')

    for epoch in epochs:
        batches = augment.iter_batches(x, y, cfg.batch_size, cfg.seed, epoch,
                mixup_alpha=alpha, index=index)
        total_loss = 0.0
        total_correct = 0
        has_accuracy = True
        for batch, xb, yb in augment.Prefetcher(batches, cfg.prefetch):
            for param_set in param_sets:
                param_set.zero_grad()
            loss, n_correct = step(xb, yb)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, batch, loss)
            for param_set in param_sets:
                optimizer.step(param_set)
            total_loss += loss
            if n_correct is None:
                has_accuracy = False
            else:
                total_correct += n_correct

        epoch_loss = total_loss / n_items
        accuracy = total_correct / float(n_items) if has_accuracy else None
        training_log.append(epoch, epoch_loss, accuracy)
        if accuracy is None:
            log.info('%s epoch %d: loss %.6f', name, epoch, epoch_loss)
        else:
            log.info('%s epoch %d: loss %.6f train_acc %.4f', name, epoch,
                    epoch_loss, accuracy)

        if validate is not None:
            score = validate(models[0])
            log.info('%s epoch %d: validation score %.4f', name, epoch, score)
            if score > best_score:
                best_score = score
                best = [param_set.snapshot() for param_set in param_sets]

    if best is not None:
        log.info('%s: keeping the parameters with validation score %.4f',
                name, best_score)
        for param_set, (params, state) in zip(param_sets, best):
            param_set.load(params, state)

    return training_log


def _as_label_matrix(labels):
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float32), np.argmax(labels, axis=1)
    return augment.one_hot_matrix(labels), labels.astype(np.intp)


def _classifier_step(model, loss_cfg):

    def step(xb, yb):
        yhat = model.forward(xb, train=True)
        loss, grad = kl_divergence_loss(yb, yhat, model.params, loss_cfg)
        if math.isfinite(loss):
            model.backward(grad)
        n_correct = int(np.sum(np.argmax(yhat, axis=1) ==
                np.argmax(yb, axis=1)))
        return loss, n_correct

    return step


def _check_trainable(x, what):
    # Batch normalization in training mode needs two items per batch.
    if x.shape[0] < 2:
        raise ShapeError('Cannot train the %s on %d item(s); at least 2 are '
                'needed' % (what, x.shape[0]))


def train_cdnn(x, labels, cfg, model_config=None, validate=None):
    """Trains a C-DNN on labeled patches.

    Args:
        x (array): [N, H, W] patches.
        labels (array): [N] class labels or [N, 4] label distributions.
        cfg (TrainConfig): The training settings.
        model_config (ModelConfig): Network dimensions.
        validate (callable): Needed for cfg.keep_best (see make_validator).

    Returns:
        (CdnnModel, TrainingLog)
    """

    _check_trainable(x, 'C-DNN')
    y, classes = _as_label_matrix(labels)
    model = CdnnModel(model_config, seed=cfg.seed)
    index = augment.oversample_indices(classes, cfg.seed) if cfg.oversample \
            else None

    training_log = _train_loop('cdnn', [model], [model.params],
            _classifier_step(model, LossConfig(cfg.lambda_l2)), x, y, cfg,
            index=index, mixup=cfg.mixup,
            validate=validate if cfg.keep_best else None)

    return model, training_log


def train_autoencoder(x, cfg, model_config=None):
    """Trains the encoder-decoder to reconstruct patches.

    Labels are not used: there is no oversampling and no mixup.

    Returns:
        (EncoderDecoderModel, TrainingLog)
    """

    _check_trainable(x, 'autoencoder')
    model = EncoderDecoderModel(model_config, seed=cfg.seed)
    # The batches carry the patches as their own targets.
    targets = np.zeros((x.shape[0], 1), dtype=np.float32)

    def step(xb, _):
        xb = np.asarray(xb, dtype=model.config.dtype)
        reconstruction = model.forward(xb, train=True)
        loss, grad = mse_loss(xb, reconstruction)
        if math.isfinite(loss):
            model.backward(grad)
        return loss * xb.shape[0], None

    training_log = _train_loop('autoencoder', [model], model.param_sets(),
            step, x, targets, cfg)

    return model, training_log


def extract_embeddings(model, x, batch_size=50):
    """Encoder embeddings [N, 512] of patches, in inference mode."""
    return model.embed(x, batch_size)


def train_mlp_head(embeddings, labels, cfg, model_config=None,
                   validate=None):
    """Trains the MLP head on fixed encoder embeddings.

    Oversampling and mixup are applied to the embedding vectors.

    Returns:
        (MlpHead, TrainingLog)
    """

    _check_trainable(embeddings, 'MLP head')
    y, classes = _as_label_matrix(labels)
    model = MlpHead(model_config, seed=cfg.seed)
    if embeddings.shape[1] != model.config.embedding_size:
        raise ShapeError('Expected %d wide embeddings, got %r' %
                (model.config.embedding_size, embeddings.shape))
    index = augment.oversample_indices(classes, cfg.seed) if cfg.oversample \
            else None

    training_log = _train_loop('mlp', [model], [model.params],
            _classifier_step(model, LossConfig(cfg.lambda_l2)), embeddings, y,
            cfg, index=index, mixup=cfg.mixup,
            validate=validate if cfg.keep_best else None)

    return model, training_log
