# coding=utf-8

"""
.. module:: respiclass.processing.frontend

    :synopsis:  Gammatone spectrogram front-end

    Turns an AudioCycle into normalized gammatone spectrogram patches:

        resample -> prepare_cycle -> stft -> gam_spectrogram -> patchify

    The gammatone weighting follows the FFT based "gammatone-like
    spectrogram" approach: the gammatone filter magnitude responses are
    sampled at the STFT bin frequencies and applied as a weight matrix to the
    STFT magnitudes instead of filtering in the time domain.
"""

import logging
from math import gcd

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from ..cycle_data import GamPatch
from ..errors import FrontEndError

log = logging.getLogger(__name__)

# Gammatone filter order and the bandwidth multiplier applied to the ERB.
GAMMATONE_ORDER = 4
BANDWIDTH_FACTOR = 1.019

# Offset added before the log compression of the gammatone spectrogram.
LOG_EPSILON = 1e-6

# Resampler design: Kaiser windowed sinc with 64 taps per polyphase branch.
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6

# Order of the Butterworth band filter applied in prepare_cycle.
BAND_FILTER_ORDER = 4


class FrontEndConfig(object):
    """Feature extraction parameters.

    The defaults are the published ICBHI gammatone front-end settings.

    Attributes:
        target_rate (int): Sample rate in Hz all cycles are resampled to.
        cycle_duration (float): Cycle length in seconds after duplication.
        band_low (float): Lower band edge in Hz. Also the lowest gammatone
            center frequency.
        band_high (float): Upper band edge in Hz. Also the highest gammatone
            center frequency.
        fft_size (int): FFT length. The STFT has fft_size/2 + 1 bins.
        window_size (float): STFT window length in seconds.
        hop_size (float): STFT hop in seconds.
        n_gammatone (int): Number of gammatone channels (the patch height).
        patch_time (int): Number of STFT frames per patch (the patch width).
    """

    # Config keys below "frontend." and their types.
    KEYS = [('target_rate', int), ('cycle_duration', float),
            ('band_low', float), ('band_high', float), ('fft_size', int),
            ('window_size', float), ('hop_size', float),
            ('n_gammatone', int), ('patch_time', int)]

    def __init__(self, target_rate=4000, cycle_duration=10, band_low=100,
                 band_high=2000, fft_size=1024, window_size=0.2,
                 hop_size=0.04, n_gammatone=128, patch_time=256):

        self.target_rate = int(target_rate)
        self.cycle_duration = float(cycle_duration)
        self.band_low = float(band_low)
        self.band_high = float(band_high)
        self.fft_size = int(fft_size)
        self.window_size = float(window_size)
        self.hop_size = float(hop_size)
        self.n_gammatone = int(n_gammatone)
        self.patch_time = int(patch_time)

        self.validate()


    @classmethod
    def from_dict(cls, values):
        """Creates a config from a dict of (unprefixed) key -> value."""
        kwargs = {}
        for name, _ in cls.KEYS:
            if name in values:
                kwargs[name] = values[name]
        return cls(**kwargs)


    def to_dict(self):
        return dict((name, getattr(self, name)) for name, _ in self.KEYS)


    @property
    def window_length(self):
        """The STFT window length in samples."""
        return int(round(self.window_size * self.target_rate))


    @property
    def hop_length(self):
        """The STFT hop in samples."""
        return int(round(self.hop_size * self.target_rate))


    @property
    def cycle_length(self):
        """The prepared cycle length in samples."""
        return int(round(self.cycle_duration * self.target_rate))


    @property
    def n_bins(self):
        return self.fft_size // 2 + 1


    @property
    def patch_shape(self):
        return (self.n_gammatone, self.patch_time)


    def validate(self):
        """Checks the parameters are consistent, raising FrontEndError."""

        if self.target_rate < 1:
            raise FrontEndError('target_rate must be a positive integer')
        if self.band_low <= 0 or self.band_low >= self.band_high:
            raise FrontEndError('Invalid band edges: %g - %g Hz' %
                    (self.band_low, self.band_high))
        if self.band_high > self.target_rate / 2.0:
            raise FrontEndError('band_high (%g Hz) is above the Nyquist '
                    'frequency (%g Hz)' % (self.band_high,
                    self.target_rate / 2.0))
        if self.window_length < 1 or self.hop_length < 1:
            raise FrontEndError('The STFT window and hop must be at least '
                    'one sample long')
        if self.window_length > self.fft_size:
            raise FrontEndError('The STFT window (%d samples) is longer than '
                    'the FFT size (%d)' % (self.window_length, self.fft_size))
        if self.cycle_length < self.window_length:
            raise FrontEndError('cycle_duration is shorter than one STFT '
                    'window')
        if self.n_gammatone < 1 or self.patch_time < 1:
            raise FrontEndError('n_gammatone and patch_time must be positive')


    def __eq__(self, other):
        if not isinstance(other, FrontEndConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()


    def __repr__(self):
        return 'FrontEndConfig(%s)' % ', '.join('%s=%r' % (name,
                getattr(self, name)) for name, _ in self.KEYS)


class StftSpectrogram(object):
    """STFT magnitudes.

    Attributes:
        magnitudes (array): [n_bins, n_frames] nonnegative magnitudes.
        bin_freqs (array): The frequency of each bin in Hz.
        frame_times (array): The center time of each frame in seconds.
    """

    def __init__(self, magnitudes, bin_freqs, frame_times):
        self.magnitudes = magnitudes
        self.bin_freqs = bin_freqs
        self.frame_times = frame_times


    @property
    def n_frames(self):
        return self.magnitudes.shape[1]


class GammatoneWeights(object):
    """Gammatone weighting matrix.

    Attributes:
        coe (array): [n_gammatone, n_bins] nonnegative weights, each row
            summing to 1.
        center_freqs (array): The increasing channel center frequencies in Hz.
    """

    def __init__(self, coe, center_freqs):
        self.coe = coe
        self.center_freqs = center_freqs


def resample(cycle, target_rate):
    """Resamples a cycle with a Kaiser windowed sinc polyphase filter.

    The anti-aliasing low pass is placed at the lower of the two Nyquist
    frequencies. A cycle already at target_rate is returned unchanged.

    Args:
        cycle (AudioCycle): The cycle to resample.
        target_rate (int): The output sample rate in Hz.

    Returns:
        An AudioCycle at target_rate.
    """

    target_rate = int(target_rate)
    if cycle.sample_rate == target_rate:
        return cycle

    divisor = gcd(cycle.sample_rate, target_rate)
    up = target_rate // divisor
    down = cycle.sample_rate // divisor
    max_rate = max(up, down)

    half_length = (RESAMPLE_TAPS_PER_PHASE // 2) * max_rate
    taps = signal.firwin(2 * half_length + 1, 1.0 / max_rate,
            window=('kaiser', RESAMPLE_KAISER_BETA))

    # resample_poly scales the taps by up.
    samples = signal.resample_poly(cycle.samples, up, down, window=taps)

    return cycle.with_samples(samples, target_rate)


def repeat_to_length(samples, length):
    """Repeats samples end to end and truncates the result to length."""

    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] == 0:
        raise FrontEndError('Cannot repeat a zero-length cycle')

    n_repeats = -(-length // samples.shape[0])
    return np.tile(samples, n_repeats)[:length]


def band_filter(samples, sample_rate, band_low, band_high):
    """Zero phase Butterworth band filter.

    When band_high reaches the Nyquist frequency the upper edge is left to the
    sampling and only a high pass at band_low is applied.
    """

    nyquist = sample_rate / 2.0
    if band_high >= nyquist:
        sos = signal.butter(BAND_FILTER_ORDER, band_low, btype='highpass',
                fs=sample_rate, output='sos')
    else:
        sos = signal.butter(BAND_FILTER_ORDER, [band_low, band_high],
                btype='bandpass', fs=sample_rate, output='sos')

    return signal.sosfiltfilt(sos, samples)


def prepare_cycle(cycle, cfg):
    """Duplicates a cycle to cfg.cycle_duration and band filters it.

    Args:
        cycle (AudioCycle): A cycle at cfg.target_rate.
        cfg (FrontEndConfig): The front-end parameters.

    Returns:
        An AudioCycle of exactly cfg.cycle_length samples.
    """

    if cycle.sample_rate != cfg.target_rate:
        raise FrontEndError('%s: expected a cycle at %d Hz, got %d Hz' %
                (cycle.cycle_id, cfg.target_rate, cycle.sample_rate))

    samples = repeat_to_length(cycle.samples, cfg.cycle_length)
    samples = band_filter(samples, cfg.target_rate, cfg.band_low,
            cfg.band_high)

    return cycle.with_samples(samples)


def stft(samples, cfg):
    """Magnitude short time Fourier transform.

    Frame t covers samples [t * hop, t * hop + window). Frames are Hamming
    windowed and zero padded to cfg.fft_size before the one-sided DFT.

    Args:
        samples (array): 1d signal at cfg.target_rate.
        cfg (FrontEndConfig): The front-end parameters.

    Returns:
        A StftSpectrogram with cfg.n_bins rows and
        floor((len - window) / hop) + 1 frames.
    """

    samples = np.asarray(samples, dtype=np.float64)
    window_length = cfg.window_length
    hop_length = cfg.hop_length
    if samples.ndim != 1 or samples.shape[0] < window_length:
        raise FrontEndError('The signal (%d samples) is shorter than one STFT '
                'window (%d samples)' % (samples.shape[-1], window_length))

    frames = sliding_window_view(samples, window_length)[::hop_length]
    windowed = frames * np.hamming(window_length)
    magnitudes = np.abs(np.fft.rfft(windowed, n=cfg.fft_size, axis=1)).T

    bin_freqs = np.fft.rfftfreq(cfg.fft_size, 1.0 / cfg.target_rate)
    frame_times = (np.arange(frames.shape[0]) * hop_length +
            window_length / 2.0) / cfg.target_rate

    return StftSpectrogram(magnitudes, bin_freqs, frame_times)


def erb_bandwidth(f):
    """Equivalent rectangular bandwidth in Hz at frequency f (Hz)."""

    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise FrontEndError('ERB bandwidth is defined for f >= 0 only')
    bandwidth = 24.7 * (4.37e-3 * f + 1.0)
    if bandwidth.ndim == 0:
        return float(bandwidth)

    return bandwidth


def _erb_rate(f):
    return 21.4 * np.log10(1.0 + 0.00437 * f)


def _inverse_erb_rate(e):
    return (10.0 ** (e / 21.4) - 1.0) / 0.00437


def erb_space(low, high, n):
    """Returns n center frequencies equally spaced on the ERB-rate scale.

    The first and last frequencies are exactly low and high.
    """
    if n == 1:
        return np.array([float(low)])

    freqs = _inverse_erb_rate(np.linspace(_erb_rate(low), _erb_rate(high), n))
    freqs[0] = low
    freqs[-1] = high

    return freqs


def gammatone_weight_matrix(cfg):
    """Builds the gammatone weighting matrix.

    Row g is the magnitude response of an order 4 gammatone filter centered
    at center_freqs[g] with bandwidth 1.019 * ERB, sampled at the STFT bin
    frequencies and normalized to sum to 1.

    Args:
        cfg (FrontEndConfig): The front-end parameters.

    Returns:
        A GammatoneWeights object.
    """

    if cfg.n_gammatone < 1:
        raise FrontEndError('n_gammatone must be at least 1')
    if cfg.band_low <= 0 or cfg.band_low >= cfg.band_high:
        raise FrontEndError('Invalid band edges: %g - %g Hz' %
                (cfg.band_low, cfg.band_high))

    center_freqs = erb_space(cfg.band_low, cfg.band_high, cfg.n_gammatone)
    bin_freqs = np.fft.rfftfreq(cfg.fft_size, 1.0 / cfg.target_rate)
    bandwidths = BANDWIDTH_FACTOR * erb_bandwidth(center_freqs)

    detuning = (bin_freqs[np.newaxis, :] - center_freqs[:, np.newaxis]) / \
            bandwidths[:, np.newaxis]
    coe = (1.0 + detuning ** 2) ** (-GAMMATONE_ORDER / 2.0)
    coe /= coe.sum(axis=1, keepdims=True)

    return GammatoneWeights(coe, center_freqs)


def gam_spectrogram(spectrogram, weights, compress=True):
    """Applies the gammatone weights to STFT magnitudes.

    Args:
        spectrogram (StftSpectrogram or array): STFT magnitudes [n_bins, T].
        weights (GammatoneWeights or array): Weights [n_gammatone, n_bins].
        compress (bool): Set to False to return the plain matrix product.
            When True (the default) the product is log compressed and
            rescaled to [0, 1]. A constant spectrogram maps to all zeros.

    Returns:
        A [n_gammatone, T] float64 array.
    """

    magnitudes = getattr(spectrogram, 'magnitudes', spectrogram)
    coe = getattr(weights, 'coe', weights)
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    coe = np.asarray(coe, dtype=np.float64)

    if magnitudes.ndim != 2 or coe.ndim != 2 or \
            coe.shape[1] != magnitudes.shape[0]:
        raise FrontEndError('Cannot apply %r gammatone weights to a %r '
                'spectrogram' % (coe.shape, magnitudes.shape))

    gam = coe @ magnitudes
    if not compress:
        return gam

    gam = np.log(gam + LOG_EPSILON)
    low = gam.min()
    value_range = gam.max() - low
    if value_range <= 0:
        return np.zeros_like(gam)

    return np.clip((gam - low) / value_range, 0.0, 1.0)


def patchify(gam, cycle_id, cfg, label=None):
    """Cuts a gammatone spectrogram into non-overlapping patches.

    The time axis is wrap padded (columns repeated from the start) up to the
    next multiple of cfg.patch_time.

    Args:
        gam (array): [n_gammatone, T] spectrogram.
        cycle_id (str): The source cycle id.
        cfg (FrontEndConfig): The front-end parameters.
        label (CycleLabel): Optional label carried by the patches.

    Returns:
        A list of GamPatch objects in temporal order.
    """

    gam = np.asarray(gam)
    if gam.ndim != 2 or gam.shape[0] != cfg.n_gammatone:
        raise FrontEndError('Expected a spectrogram with %d rows, got %r' %
                (cfg.n_gammatone, gam.shape))
    n_frames = gam.shape[1]
    if n_frames < 1:
        raise FrontEndError('Cannot patchify an empty spectrogram')

    width = cfg.patch_time
    n_patches = -(-n_frames // width)
    padded = gam[:, np.arange(n_patches * width) % n_frames]

    return [GamPatch(padded[:, i * width:(i + 1) * width], cycle_id, i,
            label=label) for i in range(n_patches)]


class FrontEnd(object):
    """The complete feature extraction chain for one configuration.

    The gammatone weight matrix is built once when the object is created and
    is shared read-only by every call, so a FrontEnd can be handed to worker
    processes and used as a map function.
    """

    def __init__(self, config=None):

        if config is None:
            config = FrontEndConfig()
        self.config = config
        self.weights = gammatone_weight_matrix(config)


    def gammatonegram(self, cycle):
        """Returns the normalized [n_gammatone, T] spectrogram of a cycle."""

        cycle = resample(cycle, self.config.target_rate)
        cycle = prepare_cycle(cycle, self.config)
        spectrogram = stft(cycle.samples, self.config)

        return gam_spectrogram(spectrogram, self.weights)


    def extract(self, cycle):
        """Returns the GamPatch list of a cycle."""
        gam = self.gammatonegram(cycle)
        return patchify(gam, cycle.cycle_id, self.config, label=cycle.label)


    def __call__(self, cycle):
        return self.extract(cycle)
