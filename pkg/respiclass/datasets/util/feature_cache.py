# coding=utf-8

'''
.. module:: respiclass.datasets.util.feature_cache

    :synopsis:  Reader/writer for GAMF gammatone patch cache files

    A GAMF file is little-endian and laid out as::

        file header   magic '4s' ('GAMF'), version u32, patch count u32
        patch record  id length u16, cycle id (UTF-8), patch index u32,
                      label u8, n_gammatone * patch_time f32 values
                      (row-major)

    The patch shape is not stored in the file. It is given by the front-end
    configuration that wrote the cache, which is kept in the ``.cfg``
    sidecar next to the cache file.
'''

import os
import struct
import logging

import numpy as np

from ...cycle_data import GamPatch
from ...errors import FeatureCacheError

__all__ = ['FeatureCacheWriter', 'write_feature_cache', 'iter_feature_cache',
           'read_feature_cache', 'DEFAULT_PATCH_SHAPE']

log = logging.getLogger(__name__)

MAGIC = b'GAMF'
VERSION = 1

#: Label byte written for patches that carry no label.
NO_LABEL = 255

DEFAULT_PATCH_SHAPE = (128, 256)

FILE_HEADER = [('magic', '4s'),
               ('version', 'I'),
               ('count', 'I')]

RECORD_HEADER = [('patch_index', 'I'),
                 ('label', 'B')]


def _fmt(fields):
    return '<' + ''.join([x[1] for x in fields])


FILE_HEADER_FMT = _fmt(FILE_HEADER)
FILE_HEADER_SIZE = struct.calcsize(FILE_HEADER_FMT)
RECORD_HEADER_FMT = _fmt(RECORD_HEADER)
RECORD_HEADER_SIZE = struct.calcsize(RECORD_HEADER_FMT)


def _pack_patch(patch, patch_shape):

    if patch.values.shape != tuple(patch_shape):
        raise FeatureCacheError('Patch %s/%d has shape %r, the cache holds '
                '%r patches' % (patch.cycle_id, patch.patch_index,
                patch.values.shape, tuple(patch_shape)))

    cycle_id = patch.cycle_id.encode('utf-8')
    if len(cycle_id) > 0xFFFF:
        raise FeatureCacheError('Cycle id is too long: %s...' %
                patch.cycle_id[:40])

    label = NO_LABEL if patch.label is None else int(patch.label)
    return b''.join([struct.pack('<H', len(cycle_id)), cycle_id,
            struct.pack(RECORD_HEADER_FMT, patch.patch_index, label),
            patch.values.astype('<f4').tobytes()])


class FeatureCacheWriter(object):
    """Streams GamPatch objects to a GAMF file.

    The patch count in the file header is filled in when the writer is
    closed, so patches can be written as they are produced. Use as a context
    manager or call close().
    """

    def __init__(self, filename, patch_shape=DEFAULT_PATCH_SHAPE):

        self.filename = filename
        self.patch_shape = tuple(patch_shape)
        self.count = 0
        self._fid = open(filename, 'wb')
        self._fid.write(struct.pack(FILE_HEADER_FMT, MAGIC, VERSION, 0))


    def write(self, patch):
        self._fid.write(_pack_patch(patch, self.patch_shape))
        self.count += 1


    def close(self):
        if self._fid is None:
            return
        self._fid.seek(0)
        self._fid.write(struct.pack(FILE_HEADER_FMT, MAGIC, VERSION,
                self.count))
        self._fid.close()
        self._fid = None


    def __enter__(self):
        return self


    def __exit__(self, exc_type, exc_value, traceback):
        self.close()
        if exc_type is not None:
            # Don't leave a half written cache that looks valid.
            try:
                os.remove(self.filename)
            except OSError:
                pass


def write_feature_cache(filename, patches, patch_shape=DEFAULT_PATCH_SHAPE):
    """Writes a list of GamPatch objects to filename. Returns the count."""

    with FeatureCacheWriter(filename, patch_shape) as writer:
        for patch in patches:
            writer.write(patch)

    return writer.count


def _read_exact(fid, size, what):
    data = fid.read(size)
    if len(data) != size:
        raise FeatureCacheError('%s: truncated file while reading %s '
                '(%d of %d bytes)' % (fid.name, what, len(data), size))
    return data


def iter_feature_cache(filename, patch_shape=DEFAULT_PATCH_SHAPE):
    """Yields the GamPatch objects stored in a GAMF file, in file order."""

    patch_shape = tuple(patch_shape)
    n_values = patch_shape[0] * patch_shape[1]

    with open(filename, 'rb') as fid:
        magic, version, count = struct.unpack(FILE_HEADER_FMT,
                _read_exact(fid, FILE_HEADER_SIZE, 'the file header'))
        if magic != MAGIC:
            raise FeatureCacheError('%s is not a GAMF feature cache (magic '
                    '%r)' % (filename, magic))
        if version != VERSION:
            raise FeatureCacheError('%s: unsupported GAMF version %d' %
                    (filename, version))

        for i in range(count):
            what = 'patch %d' % i
            id_length, = struct.unpack('<H', _read_exact(fid, 2, what))
            cycle_id = _read_exact(fid, id_length, what).decode('utf-8')
            patch_index, label = struct.unpack(RECORD_HEADER_FMT,
                    _read_exact(fid, RECORD_HEADER_SIZE, what))
            values = np.frombuffer(_read_exact(fid, 4 * n_values, what),
                    dtype='<f4').reshape(patch_shape).astype(np.float32)

            yield GamPatch(values, cycle_id, patch_index,
                    label=None if label == NO_LABEL else label)

        if fid.read(1):
            log.warning('%s has trailing bytes after %d patches', filename,
                    count)


def read_feature_cache(filename, patch_shape=DEFAULT_PATCH_SHAPE):
    """Reads a GAMF file into a list of GamPatch objects."""
    return list(iter_feature_cache(filename, patch_shape))
