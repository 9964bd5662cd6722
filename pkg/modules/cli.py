"""
Command-line interface: gen-data, train, impute, evaluate, baseline, gradcheck.

Every subcommand resolves its settings through modules.config, writes its
outputs atomically and persists the resolved settings next to each output.
Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""
import os
import sys
import logging
import argparse
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .baselines import MeanImputer, ModelImputer, SoftImputeImputer
from .config import TRAIN_DEFAULTS, RunConfig, resolve_run_config
from .data import SYNTHETIC_KINDS, HeldOutPairs, SplitDataset, SyntheticSpec, load_dataset_dir, synthesize_tables, write_dataset_dir
from .errors import EXIT_OK, EXIT_USAGE, DataError, DimensionError, UsageError, ViganError, exit_code_for
from .file_io import write_csv_atomic
from .gradcheck import TOY_STEP, run_gradient_suite
from .metrics import EvalReport, evaluate
from .model_io import load_model, save_model
from .training import run_schedule
from .vigan_model import DIRECTIONS, GENERATOR_LOSSES, IMPUTE_PATHS, ViganModel, build_model

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
SPLITS = ('test', 'validation', 'ground-truth')

GEN_DATA_DEFAULTS: Dict[str, Any] = {'kind': 'rotation', 'dim_x': 8, 'dim_y': 8, 'noise': 0.05, 'paired': 2000, 'x_only': 2000, 'y_only': 2000, 'validation': 200, 'test': 300, 'seed': 7}
IMPUTE_DEFAULTS: Dict[str, Any] = {'direction': 'x2y', 'path': 'vigan'}
EVALUATE_DEFAULTS: Dict[str, Any] = {'path': 'vigan', 'split': 'test'}
BASELINE_DEFAULTS: Dict[str, Any] = {'method': 'mean', 'split': 'test', 'rank': 0, 'iterations': 200, 'shrinkage': 1e-3, 'seed': 0}
GRADCHECK_DEFAULTS: Dict[str, Any] = {'seed': 0, 'seeds': 1, 'tolerance': 1e-4, 'step': TOY_STEP, 'workers': 4}
PATH_LABELS = {'vigan': 'VIGAN', 'generator': 'CycleGAN', 'dae': 'DAE-only'}

GLOBAL_KEYS = ('command', 'config', 'log_level')


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports bad arguments as UsageError instead of exiting with 2."""

    def error(self, message: str):
        raise UsageError(f'{self.prog}: {message}')


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='JSON file of settings (flags override it)')


def build_parser() -> CliParser:
    parser = CliParser(prog='vigan', description='Missing-view imputation with cycle-consistent GANs and a multi-modal denoising autoencoder.')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR (default: VIGAN_LOG_LEVEL or INFO)')
    sub = parser.add_subparsers(dest='command', parser_class=CliParser)

    p = sub.add_parser('gen-data', help='write a synthetic two-view dataset directory')
    _add_common(p)
    p.add_argument('--kind', choices=SYNTHETIC_KINDS)
    p.add_argument('--dim-x', type=int)
    p.add_argument('--dim-y', type=int)
    p.add_argument('--paired', type=int)
    p.add_argument('--x-only', type=int)
    p.add_argument('--y-only', type=int)
    p.add_argument('--validation', type=int, help='paired rows held out for validation')
    p.add_argument('--test', type=int, help='paired rows held out for testing')
    p.add_argument('--noise', type=float)
    p.add_argument('--seed', type=int)
    p.add_argument('--out', help='dataset directory')
    p.add_argument('--force', action='store_true', default=None, help='overwrite an existing directory')

    p = sub.add_parser('train', help='run the three-stage training schedule')
    _add_common(p)
    p.add_argument('--data', help='dataset directory')
    p.add_argument('--out', help='model file to write (VIGM)')
    p.add_argument('--log', help='training log CSV (default: <out>.log.csv)')
    p.add_argument('--plot', help='optional PNG of the loss curves')
    p.add_argument('--stages', help='comma-separated subset of 1,2,3')
    p.add_argument('--iters', help='iterations per stage, e.g. 2000,5000,5000')
    p.add_argument('--lr', type=float)
    p.add_argument('--beta1', type=float)
    p.add_argument('--beta2', type=float)
    p.add_argument('--eps', type=float)
    p.add_argument('--lambda-ae', type=float)
    p.add_argument('--lambda-cyc', type=float)
    p.add_argument('--batch-size', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--generator-loss', choices=GENERATOR_LOSSES)
    p.add_argument('--stage3-paired-only', action='store_true', default=None)
    p.add_argument('--log-every', type=int)
    p.add_argument('--generator-hidden', help='hidden widths of G1/G2, e.g. 64,64')
    p.add_argument('--discriminator-hidden', help='hidden widths of D_X/D_Y')
    p.add_argument('--dae-hidden', help='encoder widths of the autoencoder')
    p.add_argument('--dae-code', type=int, help='width of the autoencoder bottleneck')

    p = sub.add_parser('impute', help='impute the missing view for rows of a CSV')
    _add_common(p)
    p.add_argument('--model')
    p.add_argument('--direction', choices=DIRECTIONS)
    p.add_argument('--input', help='CSV holding the present view')
    p.add_argument('--out', help='CSV of imputed vectors')
    p.add_argument('--path', choices=IMPUTE_PATHS, help='imputation path (ablations)')

    p = sub.add_parser('evaluate', help='score a model in both directions')
    _add_common(p)
    p.add_argument('--model')
    p.add_argument('--data', help='dataset directory')
    p.add_argument('--out', help='evaluation report CSV')
    p.add_argument('--label', help='method label (default from --path)')
    p.add_argument('--path', choices=IMPUTE_PATHS)
    p.add_argument('--split', choices=SPLITS)
    p.add_argument('--append', action='store_true', default=None, help='add rows to an existing report')

    p = sub.add_parser('baseline', help='score a comparison imputer in both directions')
    _add_common(p)
    p.add_argument('--data', help='dataset directory')
    p.add_argument('--out', help='evaluation report CSV')
    p.add_argument('--method', choices=('mean', 'softimpute'))
    p.add_argument('--label')
    p.add_argument('--split', choices=SPLITS)
    p.add_argument('--rank', type=int, help='soft-impute rank (0: smaller view width)')
    p.add_argument('--iterations', type=int)
    p.add_argument('--shrinkage', type=float)
    p.add_argument('--seed', type=int)
    p.add_argument('--append', action='store_true', default=None)

    p = sub.add_parser('gradcheck', help='finite-difference check of every parameter gradient')
    _add_common(p)
    p.add_argument('--seed', type=int, help='first seed')
    p.add_argument('--seeds', type=int, help='number of consecutive seeds to check')
    p.add_argument('--tolerance', type=float)
    p.add_argument('--step', type=float)
    p.add_argument('--workers', type=int)
    return parser


def configure_logging(level: Optional[str]) -> None:
    name = (level or os.environ.get('VIGAN_LOG_LEVEL') or 'INFO').upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise UsageError(f'unknown log level {level!r}')
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


def _require(run: RunConfig, *keys: str) -> None:
    missing = [key for key in keys if run.get(key) is None]
    if missing:
        raise UsageError(f'{run.command}: missing ' + ', '.join((f"--{key.replace('_', '-')}" for key in missing)))


def _pairs_for(split: SplitDataset, truth, name: str, direction: str) -> HeldOutPairs:
    """Held-out pairs to score on; an empty test split falls back to the ground truth."""
    if name == 'validation':
        pairs = split.validation
    elif name == 'test':
        pairs = split.test
    else:
        pairs = None
    if pairs is not None and len(pairs):
        return pairs
    if truth is None:
        raise DataError(f'no {name} pairs and no ground truth to evaluate on')
    if name != 'ground-truth':
        logger.warning(f'{name} split is empty; scoring against the ground truth of the single-view rows')
    return truth.as_pairs(direction)


def _check_model_fits(model: ViganModel, split: SplitDataset) -> None:
    train = split.train
    if (model.dim_x, model.dim_y) != (train.dim_x, train.dim_y):
        raise DimensionError(f'model maps {model.dim_x} <-> {model.dim_y} but the dataset has widths {train.dim_x} and {train.dim_y}')


def cmd_gen_data(run: RunConfig) -> int:
    _require(run, 'out')
    spec = SyntheticSpec.from_dict(run.settings)
    data, manifest, truth = synthesize_tables(spec)
    write_dataset_dir(run.get('out'), data, manifest, truth, force=bool(run.get('force', False)))
    run.outputs['dataset'] = run.get('out')
    run.write(run.get('out'))
    return EXIT_OK


def cmd_train(run: RunConfig) -> int:
    _require(run, 'data', 'out')
    config = run.train_config()
    split, _ = load_dataset_dir(run.get('data'))
    model = build_model(split.train.dim_x, split.train.dim_y, config.architecture, np.random.default_rng(config.seed))
    model, log = run_schedule(model, split.train, config)
    out = run.get('out')
    log_path = run.get('log') or out + '.log.csv'
    save_model(model, out)
    log.to_csv(log_path)
    run.outputs.update({'model': out, 'log': log_path})
    if run.get('plot'):
        from .plotting import save_loss_plot
        save_loss_plot(log, run.get('plot'))
        run.outputs['plot'] = run.get('plot')
    run.write(out)
    return EXIT_OK


def read_present_view(path: str, names: Sequence[str]) -> np.ndarray:
    """
    Read the present-view rows of an impute input CSV.

    Columns are taken by name when the header contains every view column,
    otherwise positionally when the width matches.
    """
    if not os.path.exists(path):
        raise DataError(f'input file not found: {path}')
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f'{path} is empty')
    except pd.errors.ParserError as e:
        raise DataError(f'{path}: {e}')
    if all((name in frame.columns for name in names)):
        frame = frame[list(names)]
    elif frame.shape[1] != len(names):
        raise DimensionError(f'{path} has {frame.shape[1]} columns; the model expects {len(names)} ({", ".join(names)})')
    try:
        values = frame.apply(pd.to_numeric).to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DataError(f'{path} holds non-numeric cells: {e}')
    if np.isnan(values).any():
        raise DataError(f'{path} has empty cells in the present view')
    return values


def cmd_impute(run: RunConfig) -> int:
    _require(run, 'model', 'input', 'out')
    model = load_model(run.get('model'))
    direction = run.get('direction')
    present_names, target_names = (model.x_names, model.y_names) if direction == 'x2y' else (model.y_names, model.x_names)
    inputs = read_present_view(run.get('input'), present_names)
    imputed = ModelImputer(model, run.get('path')).impute(inputs, direction) if len(inputs) else np.zeros((0, len(target_names)))
    write_csv_atomic(run.get('out'), pd.DataFrame(imputed, columns=list(target_names)))
    logger.info(f'Imputed {len(imputed)} rows ({direction}, path {run.get("path")}) into {run.get("out")}')
    run.outputs['imputed'] = run.get('out')
    run.write(run.get('out'))
    return EXIT_OK


def _score_both(imputer_for: Callable[[str], Any], split: SplitDataset, truth, split_name: str, label: str) -> EvalReport:
    report = EvalReport()
    train = split.train
    for direction in DIRECTIONS:
        pairs = _pairs_for(split, truth, split_name, direction)
        flags = train.y_binary if direction == 'x2y' else train.x_binary
        report.extend(evaluate(imputer_for(direction), pairs, direction, label, binary=flags))
    return report


def _write_report(run: RunConfig, report: EvalReport) -> None:
    out = run.get('out')
    report.to_csv(out, append=bool(run.get('append', False)))
    run.outputs['report'] = out
    run.write(out)
    for metric in ('rmse', 'accuracy'):
        table = report.pivot(metric)
        if not table.empty:
            print(f'{metric}:\n{table.to_string(float_format=lambda v: f"{v:.4f}")}')


def cmd_evaluate(run: RunConfig) -> int:
    _require(run, 'model', 'data', 'out')
    model = load_model(run.get('model'))
    split, truth = load_dataset_dir(run.get('data'))
    _check_model_fits(model, split)
    imputer = ModelImputer(model, run.get('path'))
    label = run.get('label') or PATH_LABELS[run.get('path')]
    _write_report(run, _score_both(lambda direction: imputer, split, truth, run.get('split'), label))
    return EXIT_OK


def cmd_baseline(run: RunConfig) -> int:
    _require(run, 'data', 'out')
    split, truth = load_dataset_dir(run.get('data'))
    method = run.get('method')
    if method == 'mean':
        imputer_for = lambda direction: MeanImputer(split.train, direction)
        label = run.get('label') or 'Mean'
    else:
        softimpute = SoftImputeImputer(split.train, rank=run.get('rank') or None, iterations=run.get('iterations'), shrinkage=run.get('shrinkage'), seed=run.get('seed'))
        imputer_for = lambda direction: softimpute
        label = run.get('label') or 'SoftImpute'
    _write_report(run, _score_both(imputer_for, split, truth, run.get('split'), label))
    return EXIT_OK


def cmd_gradcheck(run: RunConfig) -> int:
    count = run.get('seeds')
    if count < 1:
        raise UsageError('--seeds must be >= 1')
    seeds = list(range(run.get('seed'), run.get('seed') + count))
    result = run_gradient_suite(seeds, step=run.get('step'), tolerance=run.get('tolerance'), max_workers=run.get('workers'))
    print(result.summary())
    result.raise_for_failure()
    return EXIT_OK


COMMANDS: Dict[str, Any] = {'gen-data': (cmd_gen_data, GEN_DATA_DEFAULTS), 'train': (cmd_train, TRAIN_DEFAULTS), 'impute': (cmd_impute, IMPUTE_DEFAULTS), 'evaluate': (cmd_evaluate, EVALUATE_DEFAULTS), 'baseline': (cmd_baseline, BASELINE_DEFAULTS), 'gradcheck': (cmd_gradcheck, GRADCHECK_DEFAULTS)}


def resolve(args: argparse.Namespace, environ: Optional[Mapping[str, str]]=None) -> RunConfig:
    """Turn parsed arguments into the resolved settings of their subcommand."""
    flags = {key: value for key, value in vars(args).items() if key not in GLOBAL_KEYS}
    _, defaults = COMMANDS[args.command]
    return resolve_run_config(args.command, flags, defaults, config_path=args.config, environ=environ)


def main(argv: Optional[List[str]]=None, environ: Optional[Mapping[str, str]]=None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])
        environ: Environment used for VIGAN_* settings instead of os.environ (tests)

    Returns:
        int: Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        if not args.command:
            raise UsageError('no subcommand given; choose one of ' + ', '.join(COMMANDS))
        run = resolve(args, environ)
        handler, _ = COMMANDS[args.command]
        return handler(run)
    except ViganError as e:
        logger.error(str(e))
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f'Unexpected error: {e}')
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
