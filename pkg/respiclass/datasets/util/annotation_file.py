# coding=utf-8

'''
.. module:: respiclass.datasets.util.annotation_file

    :synopsis:  Reader/writer for ICBHI respiratory cycle annotation files

    Each non-empty line of an ICBHI annotation file describes one cycle with
    four tab (or space) separated fields::

        <onset s> <offset s> <crackle flag> <wheeze flag>
'''


from ...cycle_data import CycleAnnotation
from ...errors import AnnotationParseError, AnnotationValueError

__all__ = ['parse_annotation_file', 'read_annotation_file',
           'serialize_annotations']


#: Field names in file order.
FIELDS = ('onset', 'offset', 'crackle', 'wheeze')


def _parse_flag(text, name, line_number):
    try:
        value = int(text)
    except ValueError:
        raise AnnotationParseError(line_number, 'Invalid %s flag %r'
                % (name, text))
    if value not in (0, 1):
        raise AnnotationValueError('line %d: %s flag must be 0 or 1, got %d'
                % (line_number, name, value))
    return value


def parse_annotation_file(text):
    '''
    :param text: The contents of an annotation file.
    :type text: str

    :returns: list of CycleAnnotation in file order

    Raises AnnotationParseError naming the (1 based) line number for lines
    that do not have four numeric fields, and AnnotationValueError for
    cycles whose offset is not after their onset.
    '''

    annotations = []
    for line_number, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != len(FIELDS):
            raise AnnotationParseError(line_number, 'Expected %d fields, '
                    'found %d' % (len(FIELDS), len(fields)))

        try:
            onset = float(fields[0])
            offset = float(fields[1])
        except ValueError:
            raise AnnotationParseError(line_number, 'Invalid onset/offset '
                    'value in %r' % line.strip())

        crackle = _parse_flag(fields[2], 'crackle', line_number)
        wheeze = _parse_flag(fields[3], 'wheeze', line_number)

        try:
            annotations.append(CycleAnnotation(onset, offset, crackle, wheeze))
        except AnnotationValueError as e:
            raise AnnotationValueError('line %d: %s' % (line_number, e.message))

    return annotations


def read_annotation_file(filename):
    '''
    Reads and parses the annotation file at filename.
    '''

    with open(filename, 'r', encoding='utf-8') as fid:
        text = fid.read()
    try:
        return parse_annotation_file(text)
    except (AnnotationParseError, AnnotationValueError) as e:
        e.message = '%s: %s' % (filename, e.message)
        raise


def serialize_annotations(annotations):
    '''
    Returns the annotation file text for a list of CycleAnnotation objects.

    Times are written with repr() so that parsing the result gives back the
    exact same floats.
    '''

    lines = []
    for annotation in annotations:
        lines.append('%r\t%r\t%d\t%d' % (annotation.onset_s,
                annotation.offset_s, annotation.crackle_flag,
                annotation.wheeze_flag))

    return '\n'.join(lines) + '\n' if lines else ''
