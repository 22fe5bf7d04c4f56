# coding=utf-8

"""
Reader for the ICBHI 2017 respiratory sound database.

The ICBHI class reads a directory of paired <stem>.wav / <stem>.txt files and
slices every recording into labeled AudioCycle objects. The module level
functions implement the individual steps so they can be used on their own:
cycle extraction, the official train/test split and the cycle manifest.
"""

import os
import logging
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd

from ..cycle_data import (AudioCycle, CycleLabel, make_cycle_id,
                          TRAIN, TEST)
from ..errors import (RespiclassError, CycleExtractionError, SplitError)
from ..processing.batch_utils import RecordingAggregator
from .util.annotation_file import read_annotation_file
from .util.csv_header import read_csv_after_header
from .util.wav_file import read_wav

log = logging.getLogger(__name__)

# Annotation offsets may overshoot the end of the recording by this many
# seconds. They are clamped to the recording end.
OFFSET_CLAMP_TOLERANCE = 0.05

# Cycle durations found in the ICBHI database.
MIN_CYCLE_DURATION = 0.2
MAX_CYCLE_DURATION = 16.2

# Manifest columns.
MANIFEST_COLUMNS = ['cycle_id', 'label', 'subset', 'duration_s']


def extract_cycles(samples, sample_rate, annotations, recording_id,
                   clamp_tolerance=OFFSET_CLAMP_TOLERANCE):
    """Slices a recording into labeled cycles.

    Cycle i contains the samples [round(onset * rate), round(offset * rate)).

    Args:
        samples (array): The recording's samples (1d).
        sample_rate (int): The recording sample rate in Hz.
        annotations (list): CycleAnnotation objects for this recording.
        recording_id (str): The recording file stem.
        clamp_tolerance (float): Offsets that overshoot the recording end by
            up to this many seconds are clamped to the end.

    Returns:
        A list of AudioCycle objects in annotation order.

    Raises:
        CycleExtractionError: An annotation reaches beyond the recording
            end by more than the clamp tolerance, or selects no samples.
    """

    samples = np.asarray(samples, dtype=np.float64)
    n_samples = samples.shape[0]
    duration = n_samples / float(sample_rate)

    cycles = []
    for index, annotation in enumerate(annotations):
        offset = annotation.offset_s
        if offset > duration:
            if offset - duration > clamp_tolerance:
                raise CycleExtractionError(recording_id, 'cycle %d ends at '
                        '%.3f s, beyond the recording end (%.3f s)' %
                        (index, offset, duration))
            log.warning('%s: clamping cycle %d offset %.4f s to the recording '
                    'end %.4f s', recording_id, index, offset, duration)
            offset = duration

        start = int(round(annotation.onset_s * sample_rate))
        end = min(int(round(offset * sample_rate)), n_samples)
        if end <= start:
            raise CycleExtractionError(recording_id, 'cycle %d [%.3f, %.3f] '
                    'selects no samples' % (index, annotation.onset_s, offset))

        cycle = AudioCycle(samples[start:end].copy(), sample_rate,
                annotation.label, make_cycle_id(recording_id, index))
        if not MIN_CYCLE_DURATION <= cycle.duration <= MAX_CYCLE_DURATION:
            log.debug('%s: cycle duration %.3f s is outside the ICBHI range',
                    cycle.cycle_id, cycle.duration)
        cycles.append(cycle)

    return cycles


def read_recording(recording_id, wav_file, annotation_file):
    """Reads one recording and its annotations and returns its cycles."""

    samples, sample_rate = read_wav(wav_file)
    annotations = read_annotation_file(annotation_file)

    return extract_cycles(samples, sample_rate, annotations, recording_id)


def official_split(cycles, split_table):
    """Assigns cycles to the train and test subsets.

    The subset is looked up by recording, so a recording can never
    contribute cycles to both subsets.

    Args:
        cycles (list): AudioCycle objects.
        split_table (dict): Recording stem -> 'train' or 'test'.

    Returns:
        A (train, test) tuple of AudioCycle lists, each in input order.

    Raises:
        SplitError: One or more recordings are missing from the split
            table. The error lists all of them.
    """

    missing = set(cycle.recording_id for cycle in cycles
                  if cycle.recording_id not in split_table)
    if missing:
        raise SplitError(missing)

    train = []
    test = []
    for cycle in cycles:
        subset = split_table[cycle.recording_id]
        if subset == TRAIN:
            train.append(cycle.with_subset(TRAIN))
        else:
            test.append(cycle.with_subset(TEST))

    return train, test


def class_counts(labels):
    """Counts cycles per class.

    Args:
        labels (iterable): AudioCycle objects or CycleLabel values.

    Returns:
        An OrderedDict CycleLabel -> count in class order.
    """
    counts = OrderedDict((label, 0) for label in CycleLabel)
    for item in labels:
        label = item.label if isinstance(item, AudioCycle) else item
        counts[CycleLabel(label)] += 1

    return counts


def manifest_rows(cycles):
    """Returns the manifest rows (as dicts) for a list of cycles."""
    return [{'cycle_id': cycle.cycle_id,
             'label': cycle.label.display_name,
             'subset': cycle.subset if cycle.subset else '',
             'duration_s': cycle.duration} for cycle in cycles]


def write_manifest(rows, filename, header_lines=()):
    """Writes the cycle manifest CSV.

    Args:
        rows (list): AudioCycle objects or dicts from manifest_rows.
        filename (str): The output file.
        header_lines (list): Lines written as "# ..." comments before the
            CSV header.
    """
    rows = [row for row in rows]
    if rows and isinstance(rows[0], AudioCycle):
        rows = manifest_rows(rows)

    table = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    with open(filename, 'w', encoding='utf-8', newline='') as fid:
        for line in header_lines:
            fid.write('# ' + line + '\n')
        table.to_csv(fid, index=False, float_format='%.4f')


def read_manifest(filename):
    """Reads a cycle manifest CSV into a pandas DataFrame."""
    return read_csv_after_header(filename, dtype={'cycle_id': str,
            'label': str, 'subset': str}, keep_default_na=False)


def _read_one(job):
    """Process pool worker: read one recording, optionally transform it.

    Returns (recording_id, cycles, transformed, error message). Exceptions
    are turned into messages so one bad file does not stop a batch.
    """
    recording_id, wav_file, annotation_file, transform, keep_audio = job
    try:
        cycles = read_recording(recording_id, wav_file, annotation_file)
        transformed = None
        if transform is not None:
            transformed = [transform(cycle) for cycle in cycles]
        if not keep_audio:
            cycles = manifest_rows(cycles)
        return recording_id, cycles, transformed, None
    except (RespiclassError, OSError, RuntimeError, ValueError) as e:
        return recording_id, None, None, str(e)


class ICBHI(object):
    """This class is the 'file reader' class for the ICBHI database.

    The ICBHI class reads a directory of recordings and annotation files and
    produces AudioCycle objects. Files that cannot be read are recorded in
    the errors dictionary instead of stopping the read.

    Attributes:
        cycles: A list of AudioCycle objects read by read_dataset.
        recording_ids: A list of the recording stems read, in read order.
        errors: A dictionary of recording stem -> error message for the
            recordings that could not be read.
        unpaired: A list of file stems missing their .wav or .txt file.
    """

    def __init__(self):

        self.cycles = []
        self.recording_ids = []
        self.errors = OrderedDict()
        self.unpaired = []


    def iter_recordings(self, source_dir, limit=0, workers=1, transform=None,
                        keep_audio=True):
        """Reads recordings one at a time.

        This is a generator yielding (recording_id, cycles, transformed) for
        every recording that was read successfully, in the order produced by
        RecordingAggregator regardless of the number of workers.

        Args:
            source_dir (str): Directory holding the .wav/.txt pairs.
            limit (int): Only read the first limit recordings (0 = all).
            workers (int): Number of worker processes (0 = one per logical
                core, 1 = read in this process).
            transform (callable): Optional picklable callable applied to each
                AudioCycle inside the worker. Its results are yielded as
                "transformed".
            keep_audio (bool): When False the cycles are returned as manifest
                row dicts (see manifest_rows) instead of AudioCycle objects,
                so the audio is not sent back from the workers.
        """

        if not os.path.isdir(source_dir):
            raise CycleExtractionError(str(source_dir), 'not a directory')

        aggregator = RecordingAggregator(source_dir)
        self.unpaired = list(aggregator.unpaired)
        recordings = aggregator.recordings
        if limit and limit < len(recordings):
            log.warning('Reading %d of %d recordings (limit)', limit,
                    len(recordings))
            recordings = recordings[:limit]

        jobs = [(stem, wav, txt, transform, keep_audio) for stem, wav, txt in recordings]

        if workers == 0:
            workers = os.cpu_count() or 1

        if workers == 1:
            results = map(_read_one, jobs)
            executor = None
        else:
            executor = ProcessPoolExecutor(max_workers=workers)
            results = executor.map(_read_one, jobs)

        try:
            for recording_id, cycles, transformed, error in results:
                if error is not None:
                    log.error('Unable to read recording %s: %s', recording_id,
                            error)
                    self.errors[recording_id] = error
                    continue
                self.recording_ids.append(recording_id)
                yield recording_id, cycles, transformed
        finally:
            if executor is not None:
                executor.shutdown(cancel_futures=True)


    def read_dataset(self, source_dir, limit=0, workers=1):
        """Reads all recordings below source_dir into self.cycles.

        Returns:
            The list of AudioCycle objects read.
        """
        for _, cycles, _ in self.iter_recordings(source_dir, limit=limit,
                workers=workers):
            self.cycles.extend(cycles)

        return self.cycles


    def __str__(self):
        """
        Reimplemented string method that provides some basic info about the
        ICBHI reader's contents.
        """

        msg = str(self.__class__) + " at " + str(hex(id(self))) + "\n"

        if self.cycles:
            msg = msg + ("    recordings read: " + str(len(self.recording_ids))
                    + "\n")
            msg = msg + "    cycles: " + str(len(self.cycles)) + "\n"
            for label, count in class_counts(self.cycles).items():
                msg = msg + "        " + label.display_name + ": " + \
                        str(count) + "\n"
        else:
            msg = msg + "  ICBHI object contains no cycles\n"

        if self.errors:
            msg = msg + "    unreadable recordings: " + str(len(self.errors)) \
                    + "\n"

        return msg
