# coding=utf-8

"""
Base data classes for respiratory cycles.

A respiratory cycle is one inhale/exhale segment of an auscultation
recording. The annotation files that ship with the ICBHI recordings give the
onset and offset of each cycle and two binary flags marking the presence of
crackles and wheezes. Those flags map onto the four cycle classes used
throughout respiclass.
"""

import enum
import numpy as np

from .errors import AnnotationValueError


class CycleLabel(enum.IntEnum):
    """The four cycle classes.

    The integer values are the column order of every probability vector in
    the package (Crackle, Wheeze, Both, Normal) and also the tie-break order
    used when deciding a class from probabilities.
    """
    CRACKLE = 0
    WHEEZE = 1
    BOTH = 2
    NORMAL = 3

    @property
    def display_name(self):
        return self.name.capitalize()

    @classmethod
    def from_name(cls, name):
        """Returns the label for a (case insensitive) class name."""
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError('Unknown cycle class: ' + repr(name))


# Number of cycle classes.
N_CLASSES = len(CycleLabel)

# Class names in probability vector order.
CLASS_NAMES = tuple(label.display_name for label in CycleLabel)

# Subset names used by the official split listing.
TRAIN = 'train'
TEST = 'test'
SUBSETS = (TRAIN, TEST)


def label_of(crackle_flag, wheeze_flag):
    """Maps the crackle and wheeze annotation flags to a CycleLabel.

    Args:
        crackle_flag (int): 1 if the cycle contains crackles, otherwise 0.
        wheeze_flag (int): 1 if the cycle contains wheezes, otherwise 0.

    Returns:
        The CycleLabel for the flag combination.
    """
    if crackle_flag and wheeze_flag:
        return CycleLabel.BOTH
    elif crackle_flag:
        return CycleLabel.CRACKLE
    elif wheeze_flag:
        return CycleLabel.WHEEZE
    else:
        return CycleLabel.NORMAL


class CycleAnnotation(object):
    """One line of an ICBHI annotation file.

    Attributes:
        onset_s (float): Cycle start in seconds from the recording start.
        offset_s (float): Cycle end in seconds from the recording start.
        crackle_flag (int): 1 if crackles are present.
        wheeze_flag (int): 1 if wheezes are present.
    """

    def __init__(self, onset_s, offset_s, crackle_flag, wheeze_flag):

        if onset_s < 0:
            raise AnnotationValueError('Cycle onset must not be negative: %r'
                    % onset_s)
        if not offset_s > onset_s:
            raise AnnotationValueError('Cycle offset %r is not after onset %r'
                    % (offset_s, onset_s))
        if crackle_flag not in (0, 1) or wheeze_flag not in (0, 1):
            raise AnnotationValueError('Crackle/wheeze flags must be 0 or 1, '
                    'got %r and %r' % (crackle_flag, wheeze_flag))

        self.onset_s = float(onset_s)
        self.offset_s = float(offset_s)
        self.crackle_flag = int(crackle_flag)
        self.wheeze_flag = int(wheeze_flag)


    @property
    def label(self):
        return label_of(self.crackle_flag, self.wheeze_flag)


    def __eq__(self, other):
        if not isinstance(other, CycleAnnotation):
            return NotImplemented
        return (self.onset_s, self.offset_s, self.crackle_flag,
                self.wheeze_flag) == (other.onset_s, other.offset_s,
                other.crackle_flag, other.wheeze_flag)


    def __repr__(self):
        return 'CycleAnnotation(%r, %r, %d, %d)' % (self.onset_s,
                self.offset_s, self.crackle_flag, self.wheeze_flag)


def make_cycle_id(recording_id, index):
    """Builds the "<recording stem>#<zero based index>" cycle identifier."""
    return '%s#%d' % (recording_id, index)


def recording_of(cycle_id):
    """Returns the recording stem part of a cycle identifier."""
    return cycle_id.rsplit('#', 1)[0]


class AudioCycle(object):
    """A single labeled respiratory cycle.

    AudioCycle objects are treated as immutable. The processing functions
    that change the samples or sample rate return new objects via the
    with_samples method.

    Attributes:
        samples (array): 1d float64 numpy array with the cycle's samples.
        sample_rate (int): The sample rate in Hz.
        label (CycleLabel): The cycle class.
        cycle_id (str): "<recording stem>#<index>".
        subset (str): 'train', 'test' or None when no split has been applied.
    """

    def __init__(self, samples, sample_rate, label, cycle_id, subset=None):

        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.shape[0] == 0:
            raise ValueError('Cycle samples must be a non-empty 1d array.')
        if int(sample_rate) < 1:
            raise ValueError('The sample rate must be a positive integer.')
        if subset is not None and subset not in SUBSETS:
            raise ValueError('Unknown subset: ' + repr(subset))

        self.samples = samples
        self.sample_rate = int(sample_rate)
        self.label = CycleLabel(label)
        self.cycle_id = cycle_id
        self.subset = subset


    @property
    def recording_id(self):
        return recording_of(self.cycle_id)


    @property
    def duration(self):
        """The cycle duration in seconds."""
        return self.samples.shape[0] / float(self.sample_rate)


    def with_samples(self, samples, sample_rate=None):
        """Returns a copy of this cycle carrying new sample data."""
        if sample_rate is None:
            sample_rate = self.sample_rate
        return AudioCycle(samples, sample_rate, self.label, self.cycle_id,
                subset=self.subset)


    def with_subset(self, subset):
        """Returns a copy of this cycle assigned to a subset."""
        return AudioCycle(self.samples, self.sample_rate, self.label,
                self.cycle_id, subset=subset)


    def __str__(self):
        msg = str(self.__class__) + " at " + str(hex(id(self))) + "\n"
        msg = msg + "          cycle id: " + self.cycle_id + "\n"
        msg = msg + "             label: " + self.label.display_name + "\n"
        msg = msg + "       sample rate: " + str(self.sample_rate) + "\n"
        msg = msg + "  duration (s): %.4f\n" % self.duration
        msg = msg + "            subset: " + str(self.subset) + "\n"
        return msg


class GamPatch(object):
    """One normalized gammatone spectrogram patch.

    Attributes:
        values (array): float32 array [n_gammatone, patch_time] in [0, 1].
        cycle_id (str): The identifier of the cycle the patch was cut from.
        patch_index (int): Temporal position of the patch within its cycle.
        label (CycleLabel): The label of the source cycle, or None.
    """

    def __init__(self, values, cycle_id, patch_index, label=None):

        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 2:
            raise ValueError('Patch values must be a 2d array.')
        if not np.all(np.isfinite(values)):
            raise ValueError('Patch %s/%d contains non-finite values.'
                    % (cycle_id, patch_index))
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError('Patch %s/%d values are outside [0, 1].'
                    % (cycle_id, patch_index))
        if int(patch_index) < 0:
            raise ValueError('The patch index must not be negative.')

        self.values = values
        self.cycle_id = cycle_id
        self.patch_index = int(patch_index)
        self.label = None if label is None else CycleLabel(label)


    @property
    def shape(self):
        return self.values.shape


    def __eq__(self, other):
        if not isinstance(other, GamPatch):
            return NotImplemented
        return (self.cycle_id == other.cycle_id and
                self.patch_index == other.patch_index and
                self.label == other.label and
                np.array_equal(self.values, other.values))


    def __repr__(self):
        return 'GamPatch(%r, %d, %s, shape=%r)' % (self.cycle_id,
                self.patch_index, self.label, self.values.shape)
