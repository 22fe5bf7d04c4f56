# coding=utf-8

"""
.. module:: respiclass.processing.icbhi_score

    :synopsis:  Late fusion, decisions and ICBHI challenge scores

    Probability vectors are ordered (Crackle, Wheeze, Both, Normal). The
    confusion matrix has one row per predicted class and one column per
    true class, in that same order.

    The ICBHI scores are

        SE = (C_c + W_w + B_b) / (C_t + W_t + B_t)
        SP = N_n / N_t
        AS = (SE + SP) / 2
        HS = 2 * SE * SP / (SE + SP)

    where X_x is the diagonal count of class X and X_t its column total.
"""

import enum
import logging
from collections import OrderedDict

import numpy as np
import pandas as pd

from ..cycle_data import CLASS_NAMES, N_CLASSES, CycleLabel
from ..datasets.util.csv_header import read_csv_after_header
from ..errors import ScoringError

log = logging.getLogger(__name__)

FUSION_SCHEMES = ('max', 'mean', 'mul')

# Sum tolerance for classifier (not fused) probability vectors.
SUM_TOLERANCE = 1e-4

PROBABILITY_COLUMNS = ['cycle_id', 'p_crackle', 'p_wheeze', 'p_both',
                       'p_normal', 'source']


class Source(enum.Enum):
    CDNN = 'cdnn'
    MLP = 'mlp'
    FUSED = 'fused'


class CycleProbability(object):
    """A cycle's class probability vector and where it came from."""

    def __init__(self, cycle_id, probs, source):

        probs = np.asarray(probs, dtype=np.float64)
        source = Source(source)
        if probs.shape != (N_CLASSES,):
            raise ScoringError('%s: expected %d probabilities, got %r' %
                    (cycle_id, N_CLASSES, probs.shape))
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ScoringError('%s: probabilities must be finite and '
                    'nonnegative' % cycle_id)
        if source is not Source.FUSED and \
                abs(probs.sum() - 1.0) > SUM_TOLERANCE:
            raise ScoringError('%s: %s probabilities sum to %.6f' %
                    (cycle_id, source.value, probs.sum()))

        self.cycle_id = cycle_id
        self.probs = probs
        self.source = source


    def __repr__(self):
        return 'CycleProbability(%r, %s, %s)' % (self.cycle_id,
                np.array2string(self.probs, precision=4), self.source.value)


def fuse(p1, p2, scheme):
    """Combines two classifiers' probabilities for one cycle.

    max and mean are elementwise. mul is the elementwise product divided by
    2. None of the results are renormalized.
    """

    if p1.cycle_id != p2.cycle_id:
        raise ScoringError('Cannot fuse probabilities of different cycles: '
                '%s and %s' % (p1.cycle_id, p2.cycle_id))

    if scheme == 'max':
        probs = np.maximum(p1.probs, p2.probs)
    elif scheme == 'mean':
        probs = (p1.probs + p2.probs) / 2.0
    elif scheme == 'mul':
        probs = p1.probs * p2.probs / 2.0
    else:
        raise ScoringError('Unknown fusion scheme %r (expected one of %s)' %
                (scheme, ', '.join(FUSION_SCHEMES)))

    return CycleProbability(p1.cycle_id, probs, Source.FUSED)


def fuse_all(probs1, probs2, scheme):
    """Fuses two lists of CycleProbability matched by cycle id.

    The result follows the order of probs1.
    """

    by_id = _index_by_id(probs2)
    ids1 = [p.cycle_id for p in probs1]
    if len(set(ids1)) != len(ids1):
        raise ScoringError('Duplicate cycle ids in the first probability set')
    if set(ids1) != set(by_id):
        missing = sorted(set(ids1) ^ set(by_id))
        raise ScoringError('The probability sets cover different cycles (%d '
                'unmatched, e.g. %s)' % (len(missing), ', '.join(missing[:5])))

    return [fuse(p, by_id[p.cycle_id], scheme) for p in probs1]


def _index_by_id(probs):
    by_id = OrderedDict()
    for p in probs:
        if p.cycle_id in by_id:
            raise ScoringError('Duplicate cycle id: ' + p.cycle_id)
        by_id[p.cycle_id] = p
    return by_id


def decide(p):
    """Returns the CycleLabel with the largest probability.

    Ties go to the first class in Crackle, Wheeze, Both, Normal order.
    """

    probs = np.asarray(getattr(p, 'probs', p), dtype=np.float64)
    if probs.shape != (N_CLASSES,) or np.any(probs < 0):
        raise ScoringError('Expected %d nonnegative probabilities, got %r' %
                (N_CLASSES, probs))
    if not np.any(probs > 0):
        raise ScoringError('Cannot decide from an all-zero probability '
                'vector')

    return CycleLabel(int(np.argmax(probs)))


class ConfusionMatrix4(object):
    """4 x 4 counts, rows = predicted class, columns = true class."""

    def __init__(self, counts=None):
        if counts is None:
            counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or np.any(counts < 0):
            raise ScoringError('Invalid confusion counts')
        self.counts = counts


    def add(self, predicted, true):
        self.counts[int(predicted), int(true)] += 1


    @property
    def totals(self):
        """Column totals (C_t, W_t, B_t, N_t)."""
        return self.counts.sum(axis=0)


    @property
    def accuracy(self):
        total = self.counts.sum()
        return float(np.trace(self.counts)) / total if total else 0.0


    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix4):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


    def __str__(self):
        return format_matrix(self)


def confusion(predicted, truth):
    """Builds the confusion matrix of cycle level decisions.

    Args:
        predicted (list): (cycle_id, CycleLabel) pairs.
        truth (list): (cycle_id, CycleLabel) pairs.

    Raises:
        ScoringError: Duplicate ids or the two lists cover different ids.
    """

    truth_by_id = OrderedDict()
    for cycle_id, label in truth:
        if cycle_id in truth_by_id:
            raise ScoringError('Duplicate ground truth cycle id: ' + cycle_id)
        truth_by_id[cycle_id] = label

    matrix = ConfusionMatrix4()
    seen = set()
    for cycle_id, label in predicted:
        if cycle_id in seen:
            raise ScoringError('Duplicate predicted cycle id: ' + cycle_id)
        seen.add(cycle_id)
        if cycle_id not in truth_by_id:
            raise ScoringError('No ground truth for cycle ' + cycle_id)
        matrix.add(label, truth_by_id[cycle_id])

    if len(seen) != len(truth_by_id):
        missing = [c for c in truth_by_id if c not in seen]
        raise ScoringError('No prediction for %d cycle(s), e.g. %s' %
                (len(missing), ', '.join(missing[:5])))

    return matrix


class IcbhiScores(object):
    """Sensitivity, specificity and their average and harmonic scores."""

    def __init__(self, se, sp):
        self.se = float(se)
        self.sp = float(sp)


    @property
    def as_score(self):
        return (self.se + self.sp) / 2.0


    @property
    def hs(self):
        total = self.se + self.sp
        return 2.0 * self.se * self.sp / total if total > 0 else 0.0


    def __repr__(self):
        return 'IcbhiScores(se=%.4f, sp=%.4f, as=%.4f, hs=%.4f)' % (self.se,
                self.sp, self.as_score, self.hs)


def icbhi_scores(matrix):
    """Computes SE, SP, AS and HS from a ConfusionMatrix4."""

    counts = matrix.counts
    totals = matrix.totals
    anomalous = totals[CycleLabel.CRACKLE] + totals[CycleLabel.WHEEZE] + \
            totals[CycleLabel.BOTH]
    normal = totals[CycleLabel.NORMAL]
    if anomalous == 0 or normal == 0:
        raise ScoringError('Scores need both anomalous and normal cycles '
                '(anomalous: %d, normal: %d)' % (anomalous, normal))

    hits = counts[CycleLabel.CRACKLE, CycleLabel.CRACKLE] + \
            counts[CycleLabel.WHEEZE, CycleLabel.WHEEZE] + \
            counts[CycleLabel.BOTH, CycleLabel.BOTH]

    return IcbhiScores(hits / float(anomalous),
            counts[CycleLabel.NORMAL, CycleLabel.NORMAL] / float(normal))


def format_matrix(matrix):

    width = max(9, max(len(str(v)) for v in matrix.counts.ravel()) + 2)
    lines = ['%-12s' % 'pred \\ true' + ''.join('%*s' % (width, name)
            for name in CLASS_NAMES)]
    for label in CycleLabel:
        lines.append('%-12s' % label.display_name + ''.join('%*d' % (width, v)
                for v in matrix.counts[label]))
    lines.append('%-12s' % 'total' + ''.join('%*d' % (width, v)
            for v in matrix.totals))

    return '\n'.join(lines)


def format_report(scores, matrix, title=None, header_lines=()):
    """The text score report: scores at 4 decimals and the matrix."""

    lines = ['# ' + line for line in header_lines]
    if title:
        lines.append(title)
    lines.extend(['SE: %.4f' % scores.se,
                  'SP: %.4f' % scores.sp,
                  'AS: %.4f' % scores.as_score,
                  'HS: %.4f' % scores.hs,
                  '',
                  format_matrix(matrix)])

    return '\n'.join(lines) + '\n'


def score_probabilities(probs, truth):
    """Decides every cycle and scores the decisions.

    Args:
        probs (list): CycleProbability objects.
        truth (dict or list): cycle id -> CycleLabel (or pairs).

    Returns:
        (ConfusionMatrix4, IcbhiScores)
    """

    truth = list(truth.items()) if isinstance(truth, dict) else list(truth)
    predicted = [(p.cycle_id, decide(p)) for p in probs]
    matrix = confusion(predicted, truth)

    return matrix, icbhi_scores(matrix)


def write_probabilities(filename, probs, header_lines=()):
    """Writes CycleProbability objects to the probability CSV format."""

    table = pd.DataFrame([[p.cycle_id] + list(p.probs) + [p.source.value]
            for p in probs], columns=PROBABILITY_COLUMNS)
    with open(filename, 'w', encoding='utf-8', newline='') as fid:
        for line in header_lines:
            fid.write('# ' + line + '\n')
        table.to_csv(fid, index=False, float_format='%.17g')


def read_probabilities(filename):
    """Reads a probability CSV into a list of CycleProbability objects."""

    try:
        table = read_csv_after_header(filename, dtype={'cycle_id': str,
                'source': str}, keep_default_na=False)
    except FileNotFoundError:
        raise ScoringError('Probability file not found: ' + str(filename))

    missing = [c for c in PROBABILITY_COLUMNS if c not in table.columns]
    if missing:
        raise ScoringError('%s: missing column(s) %s' % (filename,
                ', '.join(missing)))

    values = table[PROBABILITY_COLUMNS[1:5]].to_numpy(dtype=np.float64)
    return [CycleProbability(cycle_id, values[i], source) for i, (cycle_id,
            source) in enumerate(zip(table['cycle_id'], table['source']))]
