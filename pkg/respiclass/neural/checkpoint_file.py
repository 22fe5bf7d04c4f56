# coding=utf-8

'''
.. module:: respiclass.neural.checkpoint_file

    :synopsis:  Reader/writer for RSPM model checkpoint files

    An RSPM file is little-endian and laid out as::

        file header    magic '4s' ('RSPM'), version u32, architecture u8,
                       parameter count u32
        tensor record  (parameter count times) name length u16, name (UTF-8),
                       rank u8, dims u32 * rank, f32 values (row-major)
        state header   state count u32
        tensor record  (state count times) as above

    The state section holds the Adam moments ("adam.m/<param>",
    "adam.v/<param>"), the Adam step count ("adam.step", a rank 0 tensor) and
    the batchnorm running statistics ("<layer>.running_mean" and
    "<layer>.running_var").
'''

import enum
import struct
from collections import OrderedDict

import numpy as np

from ..errors import CheckpointError

__all__ = ['ArchTag', 'ModelCheckpoint', 'write_checkpoint',
           'read_checkpoint']

MAGIC = b'RSPM'
VERSION = 1

FILE_HEADER = [('magic', '4s'),
               ('version', 'I'),
               ('architecture', 'B'),
               ('count', 'I')]

FILE_HEADER_FMT = '<' + ''.join([x[1] for x in FILE_HEADER])
FILE_HEADER_SIZE = struct.calcsize(FILE_HEADER_FMT)


class ArchTag(enum.IntEnum):
    CDNN = 0
    ENCODER = 1
    DECODER = 2
    MLP = 3


class ModelCheckpoint(object):
    """The contents of one checkpoint file.

    Attributes:
        architecture (ArchTag): The network the tensors belong to.
        params (OrderedDict): name -> parameter array.
        state (OrderedDict): name -> Adam state / running statistic array.
    """

    def __init__(self, architecture, params, state=None):
        self.architecture = ArchTag(architecture)
        self.params = OrderedDict(params)
        self.state = OrderedDict(state if state is not None else {})


    @classmethod
    def from_param_set(cls, architecture, param_set):
        state = OrderedDict(param_set.optimizer_state())
        state.update(param_set.state)
        return cls(architecture, param_set.params, state)


    def apply_to(self, param_set, architecture=None):
        """Loads the tensors into param_set, checking names and shapes."""
        if architecture is not None and self.architecture != architecture:
            raise CheckpointError('Expected a %s checkpoint, found %s' %
                    (ArchTag(architecture).name, self.architecture.name))
        param_set.load(self.params, self.state)


def _pack_tensor(name, value):

    encoded = name.encode('utf-8')
    value = np.asarray(value)
    if value.ndim > 255:
        raise CheckpointError('%s: rank %d is too large' % (name, value.ndim))

    return b''.join([struct.pack('<H', len(encoded)), encoded,
            struct.pack('<B', value.ndim),
            struct.pack('<%dI' % value.ndim, *value.shape),
            np.ascontiguousarray(value, dtype='<f4').tobytes()])


def write_checkpoint(filename, checkpoint):
    """Writes a ModelCheckpoint to filename."""

    with open(filename, 'wb') as fid:
        fid.write(struct.pack(FILE_HEADER_FMT, MAGIC, VERSION,
                int(checkpoint.architecture), len(checkpoint.params)))
        for name, value in checkpoint.params.items():
            fid.write(_pack_tensor(name, value))
        fid.write(struct.pack('<I', len(checkpoint.state)))
        for name, value in checkpoint.state.items():
            fid.write(_pack_tensor(name, value))


class _Buffer(object):

    def __init__(self, data, filename):
        self.data = data
        self.offset = 0
        self.filename = filename


    def take(self, size, what):
        if self.offset + size > len(self.data):
            raise CheckpointError('%s: truncated file while reading %s' %
                    (self.filename, what))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _unpack_tensor(buffer):

    length, = buffer.unpack('<H', 'a tensor name')
    name = buffer.take(length, 'a tensor name').decode('utf-8')
    rank, = buffer.unpack('<B', name)
    shape = buffer.unpack('<%dI' % rank, name)
    count = int(np.prod(shape, dtype=np.int64))
    values = np.frombuffer(buffer.take(4 * count, name), dtype='<f4')

    return name, values.reshape(shape).astype(np.float32)


def read_checkpoint(filename):
    """Reads an RSPM file into a ModelCheckpoint."""

    try:
        with open(filename, 'rb') as fid:
            data = fid.read()
    except FileNotFoundError:
        raise CheckpointError('Checkpoint not found: ' + str(filename))

    buffer = _Buffer(data, filename)
    magic, version, architecture, count = buffer.unpack(FILE_HEADER_FMT,
            'the file header')
    if magic != MAGIC:
        raise CheckpointError('%s is not an RSPM checkpoint (magic %r)' %
                (filename, magic))
    if version != VERSION:
        raise CheckpointError('%s: unsupported RSPM version %d' %
                (filename, version))
    try:
        architecture = ArchTag(architecture)
    except ValueError:
        raise CheckpointError('%s: unknown architecture tag %d' %
                (filename, architecture))

    params = OrderedDict(_unpack_tensor(buffer) for _ in range(count))
    state_count, = buffer.unpack('<I', 'the state header')
    state = OrderedDict(_unpack_tensor(buffer) for _ in range(state_count))

    return ModelCheckpoint(architecture, params, state)
