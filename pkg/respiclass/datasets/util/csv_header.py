# coding=utf-8

'''
.. module:: respiclass.datasets.util.csv_header

    :synopsis:  Reading CSV artifacts that start with "# key=value" lines

    Manifests, probability files and training logs carry the effective
    configuration as leading "# " lines. Only those leading lines are
    skipped: cycle ids contain '#', so pandas' comment handling cannot be
    used on the table itself.
'''

import pandas as pd

__all__ = ['count_header_lines', 'read_csv_after_header']


def count_header_lines(filename):
    '''
    :param filename: Path to a CSV artifact.

    :returns: The number of leading lines that start with '#'.
    '''

    n = 0
    with open(filename, 'r', encoding='utf-8') as fid:
        for line in fid:
            if not line.startswith('#'):
                break
            n += 1
    return n


def read_csv_after_header(filename, **kwargs):
    '''
    Reads a CSV artifact into a DataFrame, skipping its "# " header lines.

    Keyword arguments are passed on to pandas.read_csv.
    '''

    return pd.read_csv(filename, skiprows=count_header_lines(filename),
            **kwargs)
