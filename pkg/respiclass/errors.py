# coding=utf-8

'''
.. module:: respiclass.errors

    :synopsis:  Exception classes shared by the respiclass modules

    All exceptions raised for bad data, bad files or failed numerical
    contracts derive from RespiclassError so that the command line front
    end can map them to an exit status in one place.
'''


class RespiclassError(Exception):

    def __init__(self, message):
        Exception.__init__(self, message)
        self.message = message


    def __str__(self):
        return self.message


class AnnotationParseError(RespiclassError):

    def __init__(self, line_number, message):
        self.line_number = line_number
        RespiclassError.__init__(self, 'line %d: %s' % (line_number, message))


class AnnotationValueError(RespiclassError):
    pass


class CycleExtractionError(RespiclassError):

    def __init__(self, recording_id, message):
        self.recording_id = recording_id
        RespiclassError.__init__(self, '%s: %s' % (recording_id, message))


class SplitError(RespiclassError):

    def __init__(self, missing_recordings):
        self.missing_recordings = sorted(missing_recordings)
        shown = ', '.join(self.missing_recordings[:20])
        if len(self.missing_recordings) > 20:
            shown += ', ... (%d more)' % (len(self.missing_recordings) - 20)
        RespiclassError.__init__(self, 'No subset assigned to %d recording(s): %s'
                % (len(self.missing_recordings), shown))


class WavFormatError(RespiclassError):
    pass


class FrontEndError(RespiclassError):
    pass


class FeatureCacheError(RespiclassError):
    pass


class CheckpointError(RespiclassError):
    pass


class ShapeError(RespiclassError):
    pass


class NonFiniteGradientError(RespiclassError):
    pass


class TrainingDivergedError(RespiclassError):

    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        RespiclassError.__init__(self, 'Non-finite loss (%r) at epoch %d, batch %d'
                % (loss, epoch, batch))


class EmptyClassError(RespiclassError):

    def __init__(self, class_name):
        self.class_name = class_name
        RespiclassError.__init__(self, 'Cannot oversample: class %s has no items'
                % class_name)


class ScoringError(RespiclassError):
    pass


class ConfigError(RespiclassError):
    pass
