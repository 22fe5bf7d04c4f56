# -*- coding: utf-8 -*-


import os
import re
import logging

log = logging.getLogger(__name__)


class RecordingAggregator(object):
    """This class provides a sorted list of annotated recordings.

    The ICBHI distribution stores each recording as a pair of files sharing
    a file stem: <stem>.wav holds the audio and <stem>.txt holds the cycle
    annotations. This class walks a source directory, pairs the files and
    returns them sorted by patient number and file stem for use in batch
    processing.

    Attributes:
        pattern: A compiled regex used to parse the patient number from the
            file stem.
        recordings: A list of (stem, wav path, annotation path) tuples.
        unpaired: A list of file stems that have only one of the two files.
    """
    def __init__(self, source_dir, audio_extension='.wav',
                 annotation_extension='.txt', regex=r'^(\d+)_'):

        self.pattern = re.compile(regex)
        self.audio_extension = audio_extension
        self.annotation_extension = annotation_extension

        self.unpaired = []
        self.recordings = self.sort_recordings(source_dir)


    def _get_patient(self, stem):
        """Parses the patient number from a file stem.

        Args:
            stem (str): The recording file stem, e.g. 101_1b1_Al_sc_Meditron.

        Return:
            The patient number, or -1 if the stem does not start with one.
        """
        match = self.pattern.search(stem)
        if match is None:
            return -1

        return int(match.group(1))


    def sort_recordings(self, source_dir):
        """Pairs and sorts recordings.

        This method collects the audio and annotation files below the source
        directory, pairs them by file stem and sorts the pairs by patient
        number and stem. Stems with only one of the two files are logged
        and stored in self.unpaired.

        Args:
            source_dir (str): The directory containing the files.

        Returns:
            A sorted list of (stem, wav path, annotation path) tuples.
        """

        audio = {}
        annotations = {}
        for root, _, files in os.walk(source_dir):
            for file in files:
                stem, extension = os.path.splitext(file)
                if extension.lower() == self.audio_extension:
                    audio[stem] = os.path.join(root, file)
                elif extension.lower() == self.annotation_extension:
                    annotations[stem] = os.path.join(root, file)

        # The ICBHI archive contains a few extra text files (the diagnosis
        # table, README). Only report stems that look like recordings.
        for stem in sorted(set(audio) ^ set(annotations)):
            if stem in audio or self._get_patient(stem) >= 0:
                log.warning('Recording %s is missing its %s file', stem,
                            self.annotation_extension if stem in audio
                            else self.audio_extension)
                self.unpaired.append(stem)

        paired = sorted(set(audio) & set(annotations),
                        key=lambda stem: (self._get_patient(stem), stem))

        return [(stem, audio[stem], annotations[stem]) for stem in paired]

