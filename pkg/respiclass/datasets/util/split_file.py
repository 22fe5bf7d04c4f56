# coding=utf-8

'''
.. module:: respiclass.datasets.util.split_file

    :synopsis:  Reader for the official ICBHI train/test split listing

    The listing has one recording per line: the recording file stem and the
    subset name ("train" or "test") separated by a tab.
'''

import pandas as pd

from ...cycle_data import SUBSETS
from ...errors import ConfigError

__all__ = ['read_split_file', 'write_split_file']


def read_split_file(filename):
    '''
    :param filename: Path to the split listing.

    :returns: dict mapping recording stem -> 'train' or 'test'
    '''

    try:
        table = pd.read_csv(filename, sep=r'\s+', header=None,
                names=['recording', 'subset'], dtype=str, comment='#',
                engine='python')
    except FileNotFoundError:
        raise ConfigError('Split file not found: ' + str(filename))
    except pd.errors.EmptyDataError:
        return {}

    table['subset'] = table['subset'].str.lower()
    bad = table.loc[~table['subset'].isin(SUBSETS)]
    if not bad.empty:
        raise ConfigError("%s: invalid subset name(s) for %s"
                % (filename, ", ".join(bad["recording"].tolist()[:10])))

    return dict(zip(table['recording'], table['subset']))


def write_split_file(filename, split_table):
    '''
    Writes a recording -> subset dict in the official listing format.
    '''

    table = pd.DataFrame(sorted(split_table.items()),
            columns=['recording', 'subset'])
    table.to_csv(filename, sep='\t', header=False, index=False)
