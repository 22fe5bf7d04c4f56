# coding=utf-8

"""
.. module:: respiclass.cli

    :synopsis:  The respiclass command line front end

    respiclass prepare                 extract cycles, features and manifest
    respiclass train {cdnn,autoencoder,mlp}
    respiclass evaluate [--source ...] [--fusion max|mean|mul]
    respiclass score PROBS.csv [PROBS2.csv --fusion SCHEME]
    respiclass plot [CYCLE_ID] [--log MODEL]

    Exit status: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import logging
import os
import sys
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from tqdm import tqdm

from .config import PREPARE_KEYS, PipelineConfig
from .cycle_data import SUBSETS, TEST, TRAIN, CycleLabel
from .datasets.ICBHI import ICBHI, class_counts, read_manifest, write_manifest
from .datasets.util.feature_cache import (FeatureCacheWriter,
                                          read_feature_cache)
from .datasets.util.split_file import read_split_file
from .errors import ConfigError, RespiclassError, SplitError
from .models.architectures import (AutoencoderClassifier, CdnnModel,
                                   EncoderDecoderModel, MlpHead,
                                   cycle_probabilities)
from .models.training import (TrainingLog, extract_embeddings, holdout_split,
                              make_validator, train_autoencoder, train_cdnn,
                              train_mlp_head)
from .neural.checkpoint_file import read_checkpoint, write_checkpoint
from .processing import icbhi_score
from .processing.batch_utils import RecordingAggregator
from .processing.frontend import FrontEnd
from .run_dir import RunDir

log = logging.getLogger(__name__)

MODELS = ('cdnn', 'autoencoder', 'mlp')
SOURCES = ('cdnn', 'mlp')

# Cycles per evaluation task sent to a worker process.
EVALUATE_CHUNK = 64


def _build_parser():

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='FILE',
            help='key=value config file (an artifact header works too)')
    common.add_argument('--set', metavar='KEY=VALUE', action='append',
            default=[], help='override a config key (repeatable)')
    common.add_argument('--seed', type=int, help='random seed')
    common.add_argument('--workers', type=int,
            help='worker processes (0 = one per logical core)')
    common.add_argument('--limit', type=int, metavar='N',
            help='only use the first N cycles (smoke tests)')
    common.add_argument('--run-dir', metavar='DIR',
            help='run directory (default: latest run in output.dir)')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true',
            help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true',
            help='warnings only, no progress bars')

    parser = argparse.ArgumentParser(prog='respiclass',
            description='Respiratory sound cycle classification on the ICBHI '
                        'database.')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    prepare = commands.add_parser('prepare', parents=[common],
            help='extract cycles and gammatonegram patches')
    prepare.add_argument('--force', action='store_true',
            help='rebuild an up to date cache')
    prepare.add_argument('--new-run', action='store_true',
            help='start a new run directory')

    train = commands.add_parser('train', parents=[common],
            help='train a model on the training cache')
    train.add_argument('model', choices=MODELS)
    train.add_argument('--epochs', type=int, help='number of epochs')
    train.add_argument('--keep-best', action='store_true',
            help='keep the epoch with the best holdout score')

    evaluate = commands.add_parser('evaluate', parents=[common],
            help='classify the test cycles and score them')
    evaluate.add_argument('--source', nargs='+', choices=SOURCES,
            help='classifiers to evaluate (default: all trained)')
    evaluate.add_argument('--fusion', choices=icbhi_score.FUSION_SCHEMES,
            help='fuse the probabilities of two classifiers')

    score = commands.add_parser('score', parents=[common],
            help='score one or two probability CSV files')
    score.add_argument('probabilities', nargs='+', metavar='CSV')
    score.add_argument('--fusion', choices=icbhi_score.FUSION_SCHEMES,
            help='fuse two probability files')
    score.add_argument('--manifest', metavar='CSV',
            help='cycle manifest with the true labels (default: the run '
                 'manifest)')
    score.add_argument('--output', metavar='FILE', help='write the report')

    plot = commands.add_parser('plot', parents=[common],
            help='plot a cycle gammatonegram or a training log')
    plot.add_argument('cycle_id', nargs='?', help='cycle to plot')
    plot.add_argument('--subset', choices=SUBSETS, default=TEST,
            help='feature cache holding the cycle')
    plot.add_argument('--log', choices=MODELS, dest='training_log',
            help='plot the training log of a model')
    plot.add_argument('--output', metavar='PNG', help='output file')

    return parser


def build_config(args):
    """Defaults, then --config, then --set, then the dedicated flags."""

    config = PipelineConfig()
    if args.config:
        config.load_file(args.config)
    config.apply_overrides(args.set)

    for key, attribute in (('seed', 'seed'), ('workers', 'workers'),
                           ('limit', 'limit'), ('train.epochs', 'epochs')):
        value = getattr(args, attribute, None)
        if value is not None:
            config.set(key, str(value), '--' + attribute)
    if getattr(args, 'keep_best', False):
        config.set('train.keep_best', 'true', '--keep-best')

    return config


def _show_progress(args):
    return not args.quiet and sys.stderr.isatty()


def _configure_logging(args):
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
            format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _write_text(filename, text):
    with open(filename, 'w', encoding='utf-8') as fid:
        fid.write(text)


def _cache_up_to_date(config, run):
    """True if the manifest and caches exist, were built with the same
    prepare settings and are newer than the dataset files."""

    outputs = [run.manifest] + [run.cache(subset) for subset in SUBSETS]
    sidecars = [run.cache(subset) + '.cfg' for subset in SUBSETS]
    if not all(os.path.isfile(path) for path in outputs + sidecars):
        return False

    for sidecar in sidecars:
        try:
            stored = PipelineConfig.from_file(sidecar)
        except ConfigError:
            return False
        if stored.lines(PREPARE_KEYS) != config.lines(PREPARE_KEYS):
            return False

    dataset = config['dataset.dir']
    inputs = [config['dataset.split_file']] + [os.path.join(dataset, name)
            for name in os.listdir(dataset)]
    newest_input = max(os.path.getmtime(path) for path in inputs)
    oldest_output = min(os.path.getmtime(path) for path in outputs)

    return newest_input <= oldest_output


def cmd_prepare(config, args):
    """Reads the dataset, writes the manifest and the train/test caches."""

    config.validate_dataset_paths()
    split_table = read_split_file(config['dataset.split_file'])
    frontend = FrontEnd(config.frontend_config())

    if args.new_run:
        run = RunDir.create(config['output.dir'], config['seed'])
    else:
        run = RunDir.resolve(args.run_dir, config['output.dir'],
                config['seed'], create=True)

    if not args.force and _cache_up_to_date(config, run):
        print('cache up to date: %s' % run)
        return 0

    # Check the split covers every recording before any work is done.
    aggregator = RecordingAggregator(config['dataset.dir'])
    missing = [stem for stem, _, _ in aggregator.recordings
               if stem not in split_table]
    if missing:
        raise SplitError(missing)
    for stem in aggregator.unpaired:
        log.warning('Skipping %s: missing its .wav or .txt file', stem)

    # Stale sidecars would mark a partial rebuild as up to date.
    for subset in SUBSETS:
        if os.path.isfile(run.cache(subset) + '.cfg'):
            os.remove(run.cache(subset) + '.cfg')

    limit = config['limit']
    reader = ICBHI()
    rows = []
    patch_shape = frontend.config.patch_shape
    with FeatureCacheWriter(run.cache(TRAIN), patch_shape) as train_cache, \
            FeatureCacheWriter(run.cache(TEST), patch_shape) as test_cache:
        caches = {TRAIN: train_cache, TEST: test_cache}
        recordings = reader.iter_recordings(config['dataset.dir'],
                workers=config.worker_count(), transform=frontend,
                keep_audio=False)
        progress = tqdm(recordings, total=len(aggregator.recordings),
                desc='prepare', unit='recording',
                disable=not _show_progress(args))
        try:
            for recording_id, cycle_rows, patch_lists in progress:
                subset = split_table[recording_id]
                for row, patches in zip(cycle_rows, patch_lists):
                    if limit and len(rows) >= limit:
                        break
                    row['subset'] = subset
                    rows.append(row)
                    for patch in patches:
                        caches[subset].write(patch)
                if limit and len(rows) >= limit:
                    log.warning('Stopping after %d cycles (limit)', limit)
                    break
        finally:
            progress.close()
            recordings.close()

    write_manifest(rows, run.manifest, config.header_lines())

    for subset in SUBSETS:
        labels = [CycleLabel.from_name(row['label']) for row in rows
                  if row['subset'] == subset]
        log.info('%s: %d cycles, %d patches (%s)', subset, len(labels),
                caches[subset].count, ', '.join('%s %d' % (label.display_name,
                count) for label, count in class_counts(labels).items()))

    if reader.errors:
        for recording_id, message in reader.errors.items():
            sys.stderr.write('error: %s: %s\n' % (recording_id, message))
        sys.stderr.write('error: %d recording(s) could not be read\n' %
                len(reader.errors))
        return 1

    for subset in SUBSETS:
        config.write_sidecar(run.cache(subset))
    print('prepared %d cycles in %s' % (len(rows), run))

    return 0


def _load_patches(config, run, subset):
    """Reads a feature cache, checking it matches the front-end settings.

    Only the patches of the first config['limit'] cycles are returned when a
    limit is set.
    """

    path = run.cache(subset)
    if not os.path.isfile(path) or not os.path.isfile(path + '.cfg'):
        raise ConfigError('%s feature cache not found: %s (run "prepare")' %
                (subset, path))
    stored = PipelineConfig.from_file(path + '.cfg')
    frontend_keys = [key for key in PREPARE_KEYS if key.startswith('frontend.')]
    if stored.lines(frontend_keys) != config.lines(frontend_keys):
        raise ConfigError('%s was built with different front-end settings; '
                'run "prepare --force"' % path)

    patches = read_feature_cache(path, config.frontend_config().patch_shape)

    limit = config['limit']
    if limit:
        kept = []
        cycles = set()
        for patch in patches:
            if patch.cycle_id not in cycles:
                if len(cycles) >= limit:
                    break
                cycles.add(patch.cycle_id)
            kept.append(patch)
        patches = kept

    if not patches:
        raise ConfigError('%s feature cache is empty: %s' % (subset, path))

    return patches


def _as_arrays(patches, dtype):
    x = np.stack([patch.values for patch in patches]).astype(dtype,
            copy=False)
    labels = np.array([int(patch.label) for patch in patches], dtype=np.intp)
    cycle_ids = [patch.cycle_id for patch in patches]
    return x, labels, cycle_ids


def _holdout(train_cfg, x, labels, cycle_ids):
    """Splits off the keep_best validation recordings.

    Returns (x, labels, validator or None).
    """
    if not train_cfg.keep_best:
        return x, labels, None

    mask = holdout_split(cycle_ids, train_cfg.validation_fraction,
            train_cfg.seed)
    held_ids = [cycle_id for cycle_id, held in zip(cycle_ids, mask) if held]
    log.info('Holding out %d of %d patches for validation', mask.sum(),
            mask.shape[0])
    validator = make_validator(x[mask], held_ids, labels[mask])
    return x[~mask], labels[~mask], validator


def _write_model(config, run, name, checkpoint):
    path = run.checkpoint(name)
    write_checkpoint(path, checkpoint)
    config.write_sidecar(path)
    log.info('Wrote %s', path)


def cmd_train(config, args):
    """Trains one model on the training cache."""

    run = RunDir.resolve(args.run_dir, config['output.dir'], config['seed'])
    model_config = config.model_config()
    train_cfg = config.train_config(progress=_show_progress(args))

    encoder_path = run.checkpoint('encoder')
    if args.model == 'mlp' and not os.path.isfile(encoder_path):
        raise ConfigError('encoder checkpoint not found: %s (run "train '
                'autoencoder" first)' % encoder_path)

    x, labels, cycle_ids = _as_arrays(_load_patches(config, run, TRAIN),
            model_config.dtype)
    log.info('Training %s on %d patches of %d cycles', args.model,
            x.shape[0], len(set(cycle_ids)))

    if args.model == 'cdnn':
        x, labels, validator = _holdout(train_cfg, x, labels, cycle_ids)
        model, training_log = train_cdnn(x, labels, train_cfg, model_config,
                validate=validator)
        _write_model(config, run, 'cdnn', model.checkpoint())

    elif args.model == 'autoencoder':
        model, training_log = train_autoencoder(x, train_cfg, model_config)
        encoder, decoder = model.checkpoints()
        _write_model(config, run, 'encoder', encoder)
        _write_model(config, run, 'decoder', decoder)

    else:
        autoencoder = EncoderDecoderModel(model_config, seed=train_cfg.seed)
        autoencoder.load_checkpoints(read_checkpoint(encoder_path))
        embeddings = extract_embeddings(autoencoder, x)
        embeddings, labels, validator = _holdout(train_cfg, embeddings,
                labels, cycle_ids)
        model, training_log = train_mlp_head(embeddings, labels, train_cfg,
                model_config, validate=validator)
        _write_model(config, run, 'mlp', model.checkpoint())

    training_log.write_csv(run.training_log(args.model),
            config.header_lines())
    print('trained %s: final loss %.6f (%s)' % (args.model,
            training_log.losses[-1], run))

    return 0


def load_classifier(source, run, model_config):
    """Rebuilds a trained classifier from its checkpoint(s)."""

    if source == 'cdnn':
        path = run.checkpoint('cdnn')
        if not os.path.isfile(path):
            raise ConfigError('C-DNN checkpoint not found: ' + path)
        model = CdnnModel(model_config)
        model.load_checkpoint(read_checkpoint(path))
        return model

    paths = [run.checkpoint('encoder'), run.checkpoint('mlp')]
    for path in paths:
        if not os.path.isfile(path):
            raise ConfigError('%s checkpoint not found: %s' %
                    (os.path.basename(path).split('.')[0], path))
    autoencoder = EncoderDecoderModel(model_config)
    autoencoder.load_checkpoints(read_checkpoint(paths[0]))
    head = MlpHead(model_config)
    head.load_checkpoint(read_checkpoint(paths[1]))

    return AutoencoderClassifier(autoencoder, head)


# The classifier of an evaluation worker process.
_worker_model = None


def _init_evaluate_worker(source, run_path, model_config):
    global _worker_model
    _worker_model = load_classifier(source, RunDir(run_path), model_config)


def _evaluate_chunk(chunk):
    return [(cycle_id, cycle_probabilities(_worker_model, x))
            for cycle_id, x in chunk]


def classify_cycles(source, run, model_config, cycles, workers=1):
    """Cycle level probabilities of one classifier.

    Each cycle's patches are predicted on their own, so the result does not
    depend on the number of workers.

    Args:
        cycles (OrderedDict): cycle id -> [n_patches, H, W] array.

    Returns:
        A list of CycleProbability objects in cycle order.
    """

    items = list(cycles.items())
    if workers <= 1 or len(items) <= EVALUATE_CHUNK:
        model = load_classifier(source, run, model_config)
        results = [(cycle_id, cycle_probabilities(model, x))
                   for cycle_id, x in items]
    else:
        chunks = [items[i:i + EVALUATE_CHUNK]
                  for i in range(0, len(items), EVALUATE_CHUNK)]
        with ProcessPoolExecutor(max_workers=workers,
                initializer=_init_evaluate_worker,
                initargs=(source, run.path, model_config)) as executor:
            results = [result for chunk in executor.map(_evaluate_chunk,
                    chunks) for result in chunk]

    return [icbhi_score.CycleProbability(cycle_id, probs, source)
            for cycle_id, probs in results]


def _group_cycles(patches, dtype):
    """Groups test patches by cycle: (OrderedDict of arrays, truth dict)."""
    grouped = OrderedDict()
    truth = OrderedDict()
    for patch in patches:
        grouped.setdefault(patch.cycle_id, []).append(patch)
        truth[patch.cycle_id] = CycleLabel(int(patch.label))
    cycles = OrderedDict((cycle_id, np.stack([patch.values for patch in
            sorted(group, key=lambda p: p.patch_index)]).astype(dtype,
            copy=False)) for cycle_id, group in grouped.items())
    return cycles, truth


def cmd_evaluate(config, args):
    """Classifies the test cycles, optionally fuses, writes the report."""

    run = RunDir.resolve(args.run_dir, config['output.dir'], config['seed'])
    model_config = config.model_config()

    sources = args.source
    if not sources:
        sources = [source for source in SOURCES if os.path.isfile(
                run.checkpoint(source))]
        if not sources:
            raise ConfigError('No trained classifier in %s' % run)
    sources = list(OrderedDict.fromkeys(sources))
    if args.fusion and len(sources) != 2:
        raise ConfigError('--fusion needs two classifiers, got %d' %
                len(sources))

    cycles, truth = _group_cycles(_load_patches(config, run, TEST),
            model_config.dtype)
    log.info('Evaluating %s on %d test cycles', ', '.join(sources),
            len(cycles))

    header = config.header_lines()
    results = OrderedDict()
    for source in sources:
        probs = classify_cycles(source, run, model_config, cycles,
                config.worker_count())
        icbhi_score.write_probabilities(run.probabilities(source), probs,
                header)
        results[source] = probs

    if args.fusion:
        fused = icbhi_score.fuse_all(results[sources[0]],
                results[sources[1]], args.fusion)
        name = 'fused_' + args.fusion
        icbhi_score.write_probabilities(run.probabilities(name), fused,
                header)
        blocks = [('fusion %s (%s)' % (args.fusion, ', '.join(sources)),
                fused)]
    else:
        blocks = list(results.items())

    reports = []
    for title, probs in blocks:
        matrix, scores = icbhi_score.score_probabilities(probs, truth)
        reports.append(icbhi_score.format_report(scores, matrix, title,
                header if not reports else ()))
    report = '\n'.join(reports)

    _write_text(run.report, report)
    sys.stdout.write(report)

    return 0


def cmd_score(config, args):
    """Scores probability CSV files against the manifest labels."""

    files = args.probabilities
    if len(files) > 2:
        raise ConfigError('score takes one or two probability files')
    if len(files) == 2 and not args.fusion:
        raise ConfigError('Two probability files need --fusion')
    if len(files) == 1 and args.fusion:
        raise ConfigError('--fusion needs two probability files')
    if len(files) == 2 and os.path.abspath(files[0]) == \
            os.path.abspath(files[1]):
        raise ConfigError('Cannot fuse %s with itself' % files[0])

    manifest = args.manifest
    if not manifest:
        manifest = RunDir.resolve(args.run_dir, config['output.dir'],
                config['seed']).manifest
    if not os.path.isfile(manifest):
        raise ConfigError('Manifest not found: ' + manifest)

    table = read_manifest(manifest)
    table = table.loc[table['subset'] == TEST]
    truth = OrderedDict((cycle_id, CycleLabel.from_name(label)) for
            cycle_id, label in zip(table['cycle_id'], table['label']))

    probs = [icbhi_score.read_probabilities(path) for path in files]
    if args.fusion:
        probs = icbhi_score.fuse_all(probs[0], probs[1], args.fusion)
        title = 'fusion %s (%s)' % (args.fusion, ', '.join(
                os.path.basename(path) for path in files))
    else:
        probs = probs[0]
        title = os.path.basename(files[0])

    matrix, scores = icbhi_score.score_probabilities(probs, truth)
    report = icbhi_score.format_report(scores, matrix, title,
            config.header_lines())
    if args.output:
        _write_text(args.output, report)
    sys.stdout.write(report)

    return 0


def cmd_plot(config, args):
    """Saves a gammatonegram and/or a training log figure as PNG."""

    from .plotting.matplotlib.gammatonegram import (Gammatonegram,
                                                    plot_training_log)

    if not args.cycle_id and not args.training_log:
        raise ConfigError('Nothing to plot: give a cycle id or --log MODEL')
    if args.cycle_id and args.training_log and args.output:
        raise ConfigError('--output takes one figure; plot the cycle and the '
                'log separately')

    run = RunDir.resolve(args.run_dir, config['output.dir'], config['seed'])

    if args.cycle_id:
        patches = [patch for patch in _load_patches(config, run, args.subset)
                   if patch.cycle_id == args.cycle_id]
        if not patches:
            raise ConfigError('Cycle %s is not in the %s cache' %
                    (args.cycle_id, args.subset))
        output = args.output or run.file(args.cycle_id.replace('#', '_') +
                '.png')
        Gammatonegram(None, patches, config.frontend_config()).save(output)
        print('wrote %s' % output)

    if args.training_log:
        path = run.training_log(args.training_log)
        if not os.path.isfile(path):
            raise ConfigError('Training log not found: ' + path)
        figure = plot_training_log(None, TrainingLog.read_csv(path),
                title=args.training_log)
        output = args.output or os.path.splitext(path)[0] + '.png'
        figure.savefig(output)
        print('wrote %s' % output)

    return 0


COMMANDS = {'prepare': cmd_prepare,
            'train': cmd_train,
            'evaluate': cmd_evaluate,
            'score': cmd_score,
            'plot': cmd_plot}


def main(argv=None):
    """Runs the command line. Returns the exit status."""

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    _configure_logging(args)

    try:
        config = build_config(args)
        return COMMANDS[args.command](config, args)
    except ConfigError as e:
        sys.stderr.write('error: %s\n' % e)
        return 2
    except RespiclassError as e:
        sys.stderr.write('error: %s\n' % e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
