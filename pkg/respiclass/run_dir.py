# coding=utf-8

"""
Run directories.

All artifacts of a pipeline run are written to one directory below the
output directory, named from the UTC creation time and the seed, e.g.
20261018T101500Z_seed0. Names sort chronologically.
"""

import os
import re
from datetime import datetime

import pytz

from .errors import ConfigError

RUN_NAME_PATTERN = re.compile(r'^\d{8}T\d{6}Z_seed\d+$')


def run_name(seed, now=None):
    """Builds the run directory name for a UTC time and seed."""
    if now is None:
        now = datetime.now(pytz.utc)
    elif now.tzinfo is None:
        now = pytz.utc.localize(now)
    else:
        now = now.astimezone(pytz.utc)
    return '%s_seed%d' % (now.strftime('%Y%m%dT%H%M%SZ'), seed)


class RunDir(object):
    """Paths of the artifacts in a run directory."""

    def __init__(self, path):
        self.path = path


    @classmethod
    def create(cls, output_dir, seed, now=None):
        path = os.path.join(output_dir, run_name(seed, now))
        os.makedirs(path, exist_ok=True)
        return cls(path)


    @classmethod
    def latest(cls, output_dir):
        """The most recent run directory in output_dir, or None."""
        if not os.path.isdir(output_dir):
            return None
        names = sorted(name for name in os.listdir(output_dir)
                if RUN_NAME_PATTERN.match(name) and
                os.path.isdir(os.path.join(output_dir, name)))
        return cls(os.path.join(output_dir, names[-1])) if names else None


    @classmethod
    def resolve(cls, run_dir, output_dir, seed, create=False):
        """The run directory to use for a command.

        An explicit run_dir is used as is (created when create is set).
        Otherwise the latest run in output_dir is used, or a new one is
        created when create is set.
        """
        if run_dir:
            if not os.path.isdir(run_dir):
                if not create:
                    raise ConfigError('Run directory not found: ' + run_dir)
                os.makedirs(run_dir)
            return cls(run_dir)

        latest = cls.latest(output_dir)
        if latest is not None:
            return latest
        if not create:
            raise ConfigError('No run directory in %s, run "prepare" first'
                    % output_dir)
        return cls.create(output_dir, seed)


    def file(self, name):
        return os.path.join(self.path, name)


    @property
    def manifest(self):
        return self.file('manifest.csv')


    def cache(self, subset):
        return self.file('%s.gamf' % subset)


    def checkpoint(self, name):
        return self.file('%s.rspm' % name)


    def training_log(self, name):
        return self.file('%s_log.csv' % name)


    def probabilities(self, name):
        return self.file('probabilities_%s.csv' % name)


    @property
    def report(self):
        return self.file('report.txt')


    def __str__(self):
        return self.path
