# coding=utf-8

"""
.. module:: respiclass.config

    :synopsis:  Flat key=value pipeline configuration

    Every setting of the pipeline is a typed key with a default. Settings
    are read from config files and "key=value" overrides. The effective
    configuration is written as "# key=value" lines at the top of every text
    artifact and to a ".cfg" sidecar next to every binary artifact, and such
    a header or sidecar can be passed back in as a config file.
"""

import logging
import os
from collections import OrderedDict

import numpy as np

from .errors import ConfigError
from .models.architectures import ModelConfig
from .models.training import TrainConfig
from .processing.frontend import FrontEndConfig

log = logging.getLogger(__name__)


def _parse_bool(text):
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError('not a boolean: %r' % text)


def _parse_int_tuple(text):
    values = tuple(int(v) for v in text.replace(' ', '').split(',') if v)
    if not values:
        raise ValueError('empty list')
    return values


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ','.join(str(v) for v in value)
    return str(value)


# key: (parser, default)
DEFAULTS = OrderedDict([
    ('dataset.dir', (str, '')),
    ('dataset.split_file', (str, '')),
    ('output.dir', (str, 'runs')),
    ('seed', (int, 0)),
    ('workers', (int, 0)),
    ('limit', (int, 0)),
    ('frontend.target_rate', (int, 4000)),
    ('frontend.cycle_duration', (float, 10.0)),
    ('frontend.band_low', (float, 100.0)),
    ('frontend.band_high', (float, 2000.0)),
    ('frontend.fft_size', (int, 1024)),
    ('frontend.window_size', (float, 0.2)),
    ('frontend.hop_size', (float, 0.04)),
    ('frontend.n_gammatone', (int, 128)),
    ('frontend.patch_time', (int, 256)),
    ('train.lr', (float, 0.0001)),
    ('train.batch_size', (int, 50)),
    ('train.epochs', (int, 100)),
    ('train.lambda_l2', (float, 0.0001)),
    ('train.keep_best', (_parse_bool, False)),
    ('train.validation_fraction', (float, 0.1)),
    ('train.prefetch', (int, 2)),
    ('mixup.enabled', (_parse_bool, True)),
    ('mixup.alpha', (float, 0.4)),
    ('oversample.enabled', (_parse_bool, True)),
    ('model.conv_channels', (_parse_int_tuple, (64, 128, 256, 512))),
    ('model.dense_units', (int, 1024)),
    ('model.decoder_channels', (_parse_int_tuple, (256, 128, 64, 32, 1))),
    ('model.mlp_units', (int, 1024)),
    ('model.double_precision', (_parse_bool, False)),
])

# Keys that determine the prepared manifest and feature caches.
PREPARE_KEYS = ['dataset.dir', 'dataset.split_file', 'limit'] + \
        ['frontend.' + name for name, _ in FrontEndConfig.KEYS]


class PipelineConfig(object):
    """The effective configuration: defaults plus everything applied since.

    Values are stored parsed (ints, floats, bools, int tuples, strings).
    """

    def __init__(self):
        self.values = OrderedDict((key, default) for key, (_, default)
                in DEFAULTS.items())


    def set(self, key, text, source='override'):
        """Parses text and stores it under key."""

        if key not in DEFAULTS:
            raise ConfigError('%s: unknown config key %r' % (source, key))
        parser = DEFAULTS[key][0]
        try:
            self.values[key] = parser(text.strip()) if isinstance(text, str) \
                    else parser(text)
        except (TypeError, ValueError) as e:
            raise ConfigError('%s: invalid value for %s: %r (%s)' % (source,
                    key, text, e))


    def apply_overrides(self, overrides, source='--set'):
        """Applies a list of "key=value" strings."""
        for item in overrides or []:
            if '=' not in item:
                raise ConfigError('%s expects key=value, got %r' % (source,
                        item))
            key, value = item.split('=', 1)
            self.set(key.strip(), value, source)


    def load_text(self, text, source='<config>'):
        """Applies config file text. '#' prefixes and non key=value lines are
        ignored."""
        for line in text.splitlines():
            line = line.strip().lstrip('#').strip()
            if not line or '=' not in line:
                continue
            key, value = line.split('=', 1)
            self.set(key.strip(), value, source)


    def load_file(self, filename):
        try:
            with open(filename, 'r', encoding='utf-8') as fid:
                text = fid.read()
        except OSError as e:
            raise ConfigError('Cannot read config file %s: %s' % (filename,
                    e.strerror))
        self.load_text(text, filename)


    def get(self, key):
        return self.values[key]


    def __getitem__(self, key):
        return self.values[key]


    def lines(self, keys=None):
        """Sorted "key=value" lines of the effective config."""
        keys = sorted(self.values) if keys is None else sorted(keys)
        return ['%s=%s' % (key, _format(self.values[key])) for key in keys]


    def header_lines(self):
        return self.lines()


    def write_sidecar(self, artifact):
        """Writes the effective config to <artifact>.cfg."""
        with open(artifact + '.cfg', 'w', encoding='utf-8') as fid:
            fid.write('\n'.join(self.lines()) + '\n')


    @classmethod
    def from_file(cls, filename):
        config = cls()
        config.load_file(filename)
        return config


    def frontend_config(self):
        try:
            return FrontEndConfig.from_dict(dict((name,
                    self.values['frontend.' + name]) for name, _ in
                    FrontEndConfig.KEYS))
        except Exception as e:
            raise ConfigError('Invalid front-end settings: %s' % e)


    def model_config(self):
        frontend = self.frontend_config()
        try:
            return ModelConfig(patch_shape=frontend.patch_shape,
                    conv_channels=self.values['model.conv_channels'],
                    dense_units=self.values['model.dense_units'],
                    decoder_channels=self.values['model.decoder_channels'],
                    mlp_units=self.values['model.mlp_units'],
                    dtype=np.float64 if self.values['model.double_precision']
                    else np.float32)
        except ValueError as e:
            raise ConfigError('Invalid model settings: %s' % e)


    def train_config(self, progress=False):
        return TrainConfig(lr=self.values['train.lr'],
                batch_size=self.values['train.batch_size'],
                epochs=self.values['train.epochs'],
                lambda_l2=self.values['train.lambda_l2'],
                seed=self.values['seed'],
                mixup=self.values['mixup.enabled'],
                mixup_alpha=self.values['mixup.alpha'],
                oversample=self.values['oversample.enabled'],
                keep_best=self.values['train.keep_best'],
                validation_fraction=self.values['train.validation_fraction'],
                prefetch=self.values['train.prefetch'],
                progress=progress)


    def worker_count(self):
        workers = self.values['workers']
        if workers < 0:
            raise ConfigError('workers must not be negative')
        return workers if workers > 0 else (os.cpu_count() or 1)


    def validate_dataset_paths(self):
        """Checks the dataset directory and split file exist."""
        dataset = self.values['dataset.dir']
        split_file = self.values['dataset.split_file']
        if not dataset or not os.path.isdir(dataset):
            raise ConfigError('Dataset directory not found: %r (set '
                    'dataset.dir)' % dataset)
        if not split_file or not os.path.isfile(split_file):
            raise ConfigError('Split file not found: %r (set '
                    'dataset.split_file)' % split_file)
