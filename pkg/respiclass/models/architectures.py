# coding=utf-8

"""
.. module:: respiclass.models.architectures

    :synopsis:  The C-DNN, the encoder-decoder and the MLP head

    All three networks are built from the layers in respiclass.neural. The
    convolutional part is shared by the C-DNN and the encoder: four blocks of

        batchnorm - conv 3x3 - relu - batchnorm - pool - dropout

    where the first three blocks use 2x2 max pooling and the last block global
    max pooling, so a patch is reduced to a vector with as many entries as the
    last block has channels (512 by default).

    Patch size and layer widths are parameters of ModelConfig. The defaults
    are the full size networks used on 128 x 256 gammatone patches.
"""

import logging

import numpy as np

from ..cycle_data import N_CLASSES
from ..errors import ShapeError
from ..neural.checkpoint_file import ArchTag, ModelCheckpoint
from ..neural.layers import (BatchNorm, Conv2d, Dense, Dropout,
                             GlobalMaxPool, MaxPool2x2, ReLU, Reshape,
                             Sequential, Softmax, TransposedConv2d)
from ..neural.params import ParamSet

log = logging.getLogger(__name__)

# Dropout rate after each convolutional block.
BLOCK_DROPOUT = (0.10, 0.15, 0.20, 0.25)
CDNN_HEAD_DROPOUT = 0.30
MLP_DROPOUT = 0.50

# Batch size used for inference.
PREDICT_BATCH = 50


class ModelConfig(object):
    """Network dimensions.

    Attributes:
        patch_shape (tuple): (height, width) of the input patches. Both must
            be multiples of 16 for the decoder.
        conv_channels (tuple): Output channels of the four conv blocks. The
            last entry is the embedding width.
        dense_units (int): Width of the C-DNN hidden dense layer.
        decoder_channels (tuple): Channels of the decoder feature map after
            the dense layer followed by the output channels of the four
            transposed convolutions. The last entry must be 1.
        mlp_units (int): Width of the two MLP head hidden layers.
        dtype: float32, or float64 for double-precision mode.
    """

    def __init__(self, patch_shape=(128, 256), conv_channels=(64, 128, 256, 512),
                 dense_units=1024, decoder_channels=(256, 128, 64, 32, 1),
                 mlp_units=1024, dtype=np.float32):

        self.patch_shape = tuple(int(v) for v in patch_shape)
        self.conv_channels = tuple(int(v) for v in conv_channels)
        self.dense_units = int(dense_units)
        self.decoder_channels = tuple(int(v) for v in decoder_channels)
        self.mlp_units = int(mlp_units)
        self.dtype = np.dtype(dtype)

        if len(self.conv_channels) != len(BLOCK_DROPOUT):
            raise ValueError('conv_channels needs %d entries' %
                    len(BLOCK_DROPOUT))
        if len(self.decoder_channels) != 5 or self.decoder_channels[-1] != 1:
            raise ValueError('decoder_channels needs 5 entries ending in 1')
        if min(self.conv_channels + self.decoder_channels) < 1 or \
                self.dense_units < 1 or self.mlp_units < 1:
            raise ValueError('Layer widths must be positive')


    @property
    def embedding_size(self):
        return self.conv_channels[-1]


    def __repr__(self):
        return ('ModelConfig(patch_shape=%r, conv_channels=%r, dense_units=%d, '
                'decoder_channels=%r, mlp_units=%d, dtype=%s)' %
                (self.patch_shape, self.conv_channels, self.dense_units,
                self.decoder_channels, self.mlp_units, self.dtype.name))


def conv_blocks(params, config, rng, seed):
    """Builds the four convolutional blocks shared by the C-DNN and encoder.

    The first layer reshapes [N, H, W] patches to [N, H, W, 1].
    """

    layers = [Reshape(config.patch_shape + (1,), name='expand')]
    in_channels = 1
    for i, (channels, rate) in enumerate(zip(config.conv_channels,
            BLOCK_DROPOUT)):
        prefix = 'block%d' % (i + 1)
        last = i == len(config.conv_channels) - 1
        layers.extend([
            BatchNorm(params, prefix + '.bn_in', in_channels),
            Conv2d(params, prefix + '.conv', in_channels, channels, rng),
            ReLU(prefix + '.relu'),
            BatchNorm(params, prefix + '.bn_out', channels),
            GlobalMaxPool(prefix + '.gmp') if last else
                    MaxPool2x2(prefix + '.mp'),
            Dropout(rate, seed=[seed, i], name=prefix + '.dropout')])
        in_channels = channels

    return Sequential(layers, name='conv_blocks')


def _predict(network, x, dtype, batch_size=PREDICT_BATCH):
    """Runs network in inference mode over x in batches."""
    x = np.asarray(x)
    outputs = [network.forward(np.asarray(x[i:i + batch_size], dtype=dtype),
            train=False) for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(outputs)


class CdnnModel(object):
    """The convolutional classifier: conv blocks plus a dense head.

    forward maps [N, H, W] patches to [N, 4] class probabilities.
    """

    architecture = ArchTag.CDNN

    def __init__(self, config=None, seed=0):

        if config is None:
            config = ModelConfig()
        self.config = config
        self.params = ParamSet(config.dtype)

        rng = np.random.default_rng([seed, 0])
        blocks = conv_blocks(self.params, config, rng, seed)
        head = Sequential([
            Dense(self.params, 'dense1', config.embedding_size,
                    config.dense_units, rng),
            ReLU('dense1.relu'),
            Dropout(CDNN_HEAD_DROPOUT, seed=[seed, 10], name='dense1.dropout'),
            Dense(self.params, 'dense2', config.dense_units, N_CLASSES, rng),
            Softmax('softmax')], name='head')
        self.network = Sequential([blocks, head], name='cdnn')


    def forward(self, x, train=False):
        return self.network.forward(x, train=train)


    def backward(self, grad):
        return self.network.backward(grad)


    def predict(self, x, batch_size=PREDICT_BATCH):
        """Class probabilities [N, 4] in inference mode."""
        return _predict(self.network, x, self.config.dtype, batch_size)


    def param_sets(self):
        return [self.params]


    def checkpoint(self):
        return ModelCheckpoint.from_param_set(self.architecture, self.params)


    def load_checkpoint(self, checkpoint):
        checkpoint.apply_to(self.params, self.architecture)


class EncoderDecoderModel(object):
    """The autoencoder.

    The encoder maps [N, H, W] patches to [N, 512] embeddings. The decoder
    maps embeddings back to [N, H, W] patches through a dense layer, a
    reshape to [H/16, W/16, 256] and four stride 2 transposed convolution +
    ReLU blocks. Encoder and decoder have separate ParamSets so the encoder
    can be frozen and checkpointed on its own.
    """

    def __init__(self, config=None, seed=0):

        if config is None:
            config = ModelConfig()
        self.config = config
        height, width = config.patch_shape
        if height % 16 or width % 16:
            raise ShapeError('The decoder needs patch dimensions divisible by '
                    '16, got %r' % (config.patch_shape,))

        self.encoder_params = ParamSet(config.dtype)
        self.decoder_params = ParamSet(config.dtype)

        rng = np.random.default_rng([seed, 1])
        self.encoder = conv_blocks(self.encoder_params, config, rng, seed)

        rng = np.random.default_rng([seed, 2])
        channels = config.decoder_channels
        grid = (height // 16, width // 16, channels[0])
        layers = [Dense(self.decoder_params, 'dec.dense',
                    config.embedding_size, grid[0] * grid[1] * grid[2], rng),
                  ReLU('dec.dense.relu'),
                  Reshape(grid, name='dec.reshape')]
        for i in range(4):
            prefix = 'dec.block%d' % (i + 1)
            layers.append(TransposedConv2d(self.decoder_params,
                    prefix + '.deconv', channels[i], channels[i + 1], rng))
            layers.append(ReLU(prefix + '.relu'))
        layers.append(Reshape(config.patch_shape, name='dec.output'))
        self.decoder = Sequential(layers, name='decoder')


    def forward(self, x, train=False):
        """Returns the reconstruction of x."""
        return self.decoder.forward(self.encoder.forward(x, train=train),
                train=train)


    def backward(self, grad):
        return self.encoder.backward(self.decoder.backward(grad))


    def embed(self, x, batch_size=PREDICT_BATCH):
        """[N, 512] embeddings in inference mode."""
        return _predict(self.encoder, x, self.config.dtype, batch_size)


    def reconstruct(self, x, batch_size=PREDICT_BATCH):
        return _predict(Sequential([self.encoder, self.decoder]), x,
                self.config.dtype, batch_size)


    def param_sets(self):
        return [self.encoder_params, self.decoder_params]


    def checkpoints(self):
        """Returns the (encoder, decoder) ModelCheckpoints."""
        return (ModelCheckpoint.from_param_set(ArchTag.ENCODER,
                self.encoder_params),
                ModelCheckpoint.from_param_set(ArchTag.DECODER,
                self.decoder_params))


    def load_checkpoints(self, encoder, decoder=None):
        encoder.apply_to(self.encoder_params, ArchTag.ENCODER)
        if decoder is not None:
            decoder.apply_to(self.decoder_params, ArchTag.DECODER)


class MlpHead(object):
    """Classifier on encoder embeddings: [N, 512] -> [N, 4]."""

    architecture = ArchTag.MLP

    def __init__(self, config=None, seed=0):

        if config is None:
            config = ModelConfig()
        self.config = config
        self.params = ParamSet(config.dtype)

        rng = np.random.default_rng([seed, 3])
        units = config.mlp_units
        self.network = Sequential([
            Dense(self.params, 'mlp1', config.embedding_size, units, rng),
            ReLU('mlp1.relu'),
            Dropout(MLP_DROPOUT, seed=[seed, 20], name='mlp1.dropout'),
            Dense(self.params, 'mlp2', units, units, rng),
            ReLU('mlp2.relu'),
            Dropout(MLP_DROPOUT, seed=[seed, 21], name='mlp2.dropout'),
            Dense(self.params, 'mlp3', units, N_CLASSES, rng),
            Softmax('softmax')], name='mlp')


    def forward(self, x, train=False):
        return self.network.forward(x, train=train)


    def backward(self, grad):
        return self.network.backward(grad)


    def predict(self, x, batch_size=PREDICT_BATCH):
        return _predict(self.network, x, self.config.dtype, batch_size)


    def param_sets(self):
        return [self.params]


    def checkpoint(self):
        return ModelCheckpoint.from_param_set(self.architecture, self.params)


    def load_checkpoint(self, checkpoint):
        checkpoint.apply_to(self.params, self.architecture)


class AutoencoderClassifier(object):
    """A frozen encoder followed by an MLP head, used for inference."""

    def __init__(self, autoencoder, head):
        self.autoencoder = autoencoder
        self.head = head


    def predict(self, x, batch_size=PREDICT_BATCH):
        return self.head.predict(self.autoencoder.embed(x, batch_size),
                batch_size)


def cycle_probabilities(model, patches):
    """Averages a model's patch probabilities over the patches of one cycle.

    Args:
        model: A CdnnModel or AutoencoderClassifier (anything with predict).
        patches (list): The GamPatch objects (or [H, W] arrays) of a cycle.

    Returns:
        The mean 4-class probability vector (float64).
    """

    if len(patches) == 0:
        raise ShapeError('Cannot compute cycle probabilities without patches')

    x = np.stack([getattr(patch, 'values', patch) for patch in patches])
    probs = model.predict(x)

    return probs.astype(np.float64).mean(axis=0)
