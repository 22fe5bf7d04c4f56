# coding=utf-8

'''
.. module:: respiclass.datasets.util.wav_file

    :synopsis:  WAV decoding for auscultation recordings

    The ICBHI recordings were made with several stethoscopes and are
    distributed as heterogeneous WAV files. 16, 24 and 32 bit PCM files are
    accepted. Multichannel files are averaged to mono.
'''

import logging
import numpy as np
import soundfile as sf

from ...errors import WavFormatError

__all__ = ['read_wav', 'write_wav']

log = logging.getLogger(__name__)

#: soundfile subtypes we accept.
PCM_SUBTYPES = ('PCM_16', 'PCM_24', 'PCM_32')


def read_wav(filename):
    '''
    :param filename: Path to a WAV file.
    :type filename: str

    :returns: (samples, sample_rate) where samples is a 1d float64 array
        scaled to [-1, 1).
    '''

    try:
        info = sf.info(filename)
    except RuntimeError as e:
        raise WavFormatError('%s: cannot read WAV header (%s)' % (filename, e))

    if info.format != 'WAV' or info.subtype not in PCM_SUBTYPES:
        raise WavFormatError('%s: unsupported encoding %s/%s, expected '
                '16/24/32 bit PCM WAV' % (filename, info.format, info.subtype))

    data, sample_rate = sf.read(filename, dtype='float64', always_2d=True)
    if data.shape[0] == 0:
        raise WavFormatError('%s: file contains no samples' % filename)

    if data.shape[1] > 1:
        log.warning('%s has %d channels, averaging to mono', filename,
                data.shape[1])
        samples = data.mean(axis=1)
    else:
        samples = data[:, 0].copy()

    return samples, int(sample_rate)


def write_wav(filename, samples, sample_rate, subtype='PCM_16'):
    '''
    Writes samples (1d mono or 2d [n_samples, n_channels]) as a PCM WAV file.
    '''

    if subtype not in PCM_SUBTYPES:
        raise WavFormatError('Unsupported WAV subtype: ' + subtype)
    sf.write(filename, np.asarray(samples), int(sample_rate), subtype=subtype,
            format='WAV')
