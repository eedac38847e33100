#!/usr/bin/env python3
"""
scoreshape - Command Line Interface

Batch entry point for generating synthetic samples, running selection
studies and deriving reports.

COMMANDS:

    simulate     Draw a DGP sample and write it as CSV (+ sidecar schema)
                 scoreshape simulate --dgp 1 --n 30000 --seed 1 --out dgp1.csv

    tree-study   Replicated selection study on a DGP (trees by default)
                 scoreshape tree-study --dgp 1 --reps 10 --out results/dgp1_tree
                 scoreshape tree-study --config study.toml --out results/study

    select       One grid search on a CSV carrying true probabilities
                 scoreshape select --csv dgp1.csv --learner boost --out results/select

    real-study   KL selection against a Beta prior fitted to GLM scores
                 scoreshape real-study --csv bank.csv --schema bank.schema.toml --out results/bank

    resample     Reshape a sample's probabilities toward a Beta target
                 scoreshape resample --in dgp4.csv --target-dgp 1 --epsilon 0.05 --out dgp4_rs.csv

    metrics      Metric table of a score column
                 scoreshape metrics --in scored.csv --scores score

    report       report.md plus SVG histograms from a study directory
                 scoreshape report --dir results/dgp1_tree

EXIT CODES:
    0  success
    1  runtime error (bad data, numeric failure, I/O)
    2  usage error (invalid flags)

SCORESHAPE_THREADS caps the number of worker threads.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

import config
from distributions import fit_beta_mle, histogram
from errors import DomainError, ParameterError, ScoreshapeError
from formatters import (
    STUDY_FILES,
    ConsoleWriter,
    FileWriter,
    check_writable,
    format_metric_table,
    format_selection_report,
    format_summary_table,
    slugify,
    write_report,
    write_study_outputs,
)
from learners import model_to_json
from metrics import calibration_curve, compute_metric_table, ici_details
from models import (
    ALL_CRITERIA,
    BetaPrior,
    CriterionKind,
    Dataset,
    DgpSpec,
    LearnerKind,
)
from selection_harness import (
    ReferenceDistribution,
    StudyConfig,
    StudyResult,
    build_grid,
    fit_grid_point,
    load_study_config,
    real_data_study,
    replicate,
    select_and_report,
)
from synthetic_dgp import generate, generate_resampled_dgp4, resample_iterative, resample_rejection
from tabular_data import export_sample_csv, load_csv, load_schema, parse_schema_flags, schema_path_for, split

__version__ = "1.0.0"

DEFAULT_LOG_FILE = "scoreshape_debug.log"

# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

def setup_logging(verbose: bool = False, quiet: bool = False,
                  log_file: Optional[str] = None, no_log_file: bool = False) -> None:
    """
    Configure logging for the application.

    Args:
        verbose: Enable DEBUG level logging to console
        quiet: Show only WARNING and above to console
        log_file: Custom log file path (default: scoreshape_debug.log)
        no_log_file: Disable file logging entirely
    """
    if verbose:
        console_level = logging.DEBUG
    elif quiet:
        console_level = logging.WARNING
    else:
        console_level = logging.INFO

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handlers: List[logging.Handler] = []

    console_handler = logging.StreamHandler()
    console_handler.setLevel(console_level)
    console_handler.setFormatter(formatter)
    handlers.append(console_handler)

    if not no_log_file:
        log_file_path = log_file if log_file else DEFAULT_LOG_FILE
        try:
            file_handler = logging.FileHandler(log_file_path, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            handlers.append(file_handler)
        except OSError as e:
            print(f"Warning: could not create log file '{log_file_path}': {e}", file=sys.stderr)

    logging.basicConfig(
        level=logging.DEBUG,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


logger = logging.getLogger(__name__)


# ============================================================================
# ARGUMENT VALIDATION
# ============================================================================

def positive_int(value_str: str) -> int:
    """
    argparse type for integers >= 1.

    Raises:
        argparse.ArgumentTypeError: On non-integers or values below 1
    """
    try:
        value = int(value_str)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{value_str}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1 (got {value})")
    return value


def epsilon_value(value_str: str) -> float:
    """argparse type for a KS tolerance in (0, 0.5]."""
    try:
        value = float(value_str)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{value_str}'") from None
    if not (0 < value <= 0.5):
        raise argparse.ArgumentTypeError(f"must lie in (0, 0.5] (got {value})")
    return value


def positive_float(value_str: str) -> float:
    try:
        value = float(value_str)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{value_str}'") from None
    if not (value > 0 and np.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be positive and finite (got {value})")
    return value


def criteria_list(value_str: str) -> tuple:
    """
    Comma-separated criteria such as 'auc,kl' or 'AUC*,KL*'.

    Examples:
        >>> [c.value for c in criteria_list('AUC*,kl')]
        ['auc', 'kl']
    """
    try:
        return tuple(CriterionKind.parse(part) for part in value_str.split(',') if part.strip())
    except ParameterError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _dataset_schema(args: argparse.Namespace, csv_path: Path) -> list:
    if getattr(args, 'column', None):
        return parse_schema_flags(args.column)
    schema_path = Path(args.schema) if args.schema else schema_path_for(csv_path)
    if not schema_path.is_file():
        raise FileNotFoundError(
            f"No schema for {csv_path}: expected {schema_path} (or pass --schema / --column name=kind)"
        )
    return load_schema(schema_path)


def _load_dataset(args: argparse.Namespace, csv_arg: str) -> Dataset:
    csv_path = Path(csv_arg)
    return load_csv(csv_path, _dataset_schema(args, csv_path))


def _grid_overrides(args: argparse.Namespace, learner: LearnerKind) -> Dict:
    if not args.grid_file:
        return {}
    return dict(config.read_toml(args.grid_file).get(learner.value, {}))


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_simulate(args: argparse.Namespace) -> int:
    """Write a GeneratedSample as CSV with its sidecar schema."""
    out = Path(args.out)
    check_writable([out, schema_path_for(out)], args.force)

    spec = DgpSpec(args.dgp, n_noise=args.noise, seed=args.seed)
    if args.dgp4_resample:
        sample = generate_resampled_dgp4(spec, args.n, epsilon=args.epsilon)
    else:
        sample = generate(spec, args.n)

    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, schema_file = export_sample_csv(sample, out, include_true_prob=not args.no_true_prob)
    print(f"Wrote {sample.dataset.n} rows to {csv_path} (schema {schema_file})")
    return 0


def _study_from_args(args: argparse.Namespace) -> StudyConfig:
    overrides = {
        'learner': args.learner,
        'dgp': args.dgp,
        'noise': args.noise,
        'n': args.n,
        'reps': args.reps,
        'seed': args.seed,
        'criteria': args.criteria,
        'n_trees': args.n_trees,
        'include_extremes': False if args.no_extremes else None,
        'include_glm': True if args.include_glm else None,
        'dgp4_resample': True if args.dgp4_resample else None,
        'epsilon': args.epsilon,
    }
    if args.config:
        study = load_study_config(args.config, **overrides)
    else:
        study = StudyConfig(**{k: v for k, v in overrides.items() if v is not None})

    grid = _grid_overrides(args, study.learner)
    if grid:
        study = StudyConfig(**{**study.to_dict(), 'grid': {**grid, **study.grid}})
    return study


def cmd_tree_study(args: argparse.Namespace) -> int:
    """Replicated selection study; writes CSV tables and the manifest."""
    check_writable([Path(args.out) / name for name in STUDY_FILES], args.force)
    study = _study_from_args(args)
    result = replicate(study)
    write_study_outputs(result, args.out, force=args.force)
    ConsoleWriter().write_lines(format_summary_table(result.summary_frame()))
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    """Grid search on a CSV with true probabilities, split in thirds."""
    out = Path(args.out)
    check_writable([out / name for name in STUDY_FILES], args.force)
    dataset = _load_dataset(args, args.csv)
    if not dataset.has_true_prob:
        raise DomainError(f"{args.csv} has no true_probability column; use real-study for real data")

    learner = LearnerKind(args.learner)
    grid = build_grid(learner, dataset.n_features, _grid_overrides(args, learner))
    parts = split(dataset, config.SIMULATION_RATIOS, args.seed)
    train = dataset.subset(parts.train)
    report = select_and_report(
        train,
        dataset.subset(parts.validation),
        dataset.subset(parts.test),
        grid,
        ReferenceDistribution.true_probabilities(),
        criteria=args.criteria or ALL_CRITERIA,
        seed=args.seed,
        include_extremes=not args.no_extremes,
    )

    study = StudyConfig(learner=learner, reps=1, seed=args.seed, criteria=args.criteria or ALL_CRITERIA,
                        include_extremes=not args.no_extremes, csv=str(args.csv), schema=args.schema)
    result = StudyResult(config=study, reports=(report,), seeds=(args.seed,))
    write_study_outputs(result, out, force=args.force, extra_manifest={'grid': grid.to_dict()})

    if args.save_models:
        for row in report.rows:
            path = out / "models" / f"{slugify(row.name)}.json"
            model = fit_grid_point(row.point, train, grid, args.seed)
            FileWriter(path, args.force).write(model_to_json(model))
            logger.info(f"Saved {row.name} model ({row.point.label()}) to {path}")

    ConsoleWriter().write_lines(format_selection_report(report))
    return 0


def cmd_real_study(args: argparse.Namespace) -> int:
    """Real-data study with a GLM-fitted Beta prior as KL reference."""
    out = Path(args.out)
    check_writable([out / name for name in STUDY_FILES], args.force)
    dataset = _load_dataset(args, args.csv)
    learner = LearnerKind(args.learner)
    grid = build_grid(learner, dataset.n_features, _grid_overrides(args, learner))

    criteria = args.criteria or tuple(c for c in ALL_CRITERIA if c is not CriterionKind.MSE_STAR)
    report = real_data_study(
        dataset,
        learner=learner,
        grid=grid,
        prior_model=args.prior,
        seed=args.seed,
        criteria=criteria,
        include_extremes=args.extremes,
    )
    study = StudyConfig(learner=learner, reps=1, seed=args.seed, criteria=criteria,
                        include_extremes=args.extremes, csv=str(args.csv), schema=args.schema)
    result = StudyResult(config=study, reports=(report,), seeds=(args.seed,))
    write_study_outputs(result, out, force=args.force, extra_manifest={'prior_model': args.prior, 'grid': grid.to_dict()})
    ConsoleWriter().write_lines(format_selection_report(report))
    return 0


def cmd_resample(args: argparse.Namespace) -> int:
    """Resample a sample's true probabilities toward a Beta target."""
    out = Path(args.out)
    check_writable([out, schema_path_for(out)], args.force)
    dataset = _load_dataset(args, args.input)
    if not dataset.has_true_prob:
        raise DomainError(f"{args.input} has no true_probability column to resample on")

    if args.target_beta:
        target = BetaPrior(*args.target_beta)
    else:
        reference = generate(DgpSpec(args.target_dgp, seed=args.seed), config.REFERENCE_SAMPLE_SIZE)
        target = fit_beta_mle(reference.dataset.true_prob)
    logger.info(f"Resampling target: {target}")

    if args.method == 'rejection':
        result = resample_rejection(dataset.true_prob, target.pdf, target.cdf, seed=args.seed)
    else:
        result = resample_iterative(dataset.true_prob, target.pdf, target.cdf, args.epsilon, seed=args.seed)

    out.parent.mkdir(parents=True, exist_ok=True)
    export_sample_csv(dataset.subset(result.indices), out)
    print(f"Kept {result.size}/{dataset.n} rows, KS distance {result.ks_distance:.4f} "
          f"({result.iterations} passes) -> {out}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    """Metric table of one score column against the labels."""
    dataset = _load_dataset(args, args.input)
    if args.scores not in dataset.feature_names:
        raise ParameterError(f"Score column '{args.scores}' is not a numeric column of {args.input}")
    scores = dataset.features[:, dataset.feature_names.index(args.scores)]

    if args.prior_alpha is not None and args.prior_beta is not None:
        reference = ReferenceDistribution.beta_prior(BetaPrior(args.prior_alpha, args.prior_beta), args.bins)
    elif dataset.has_true_prob:
        reference = ReferenceDistribution.true_probabilities(args.bins)
    else:
        raise DomainError("No reference distribution: add a true_probability column or --prior-alpha/--prior-beta")

    values = reference.values(dataset)
    table = compute_metric_table(scores, dataset.target, histogram(values, args.bins), values,
                                 true_prob=dataset.true_prob)
    curve = calibration_curve(np.clip(scores, 0.0, 1.0), dataset.target, args.calibration_bins)
    estimate = ici_details(np.clip(scores, 0.0, 1.0), dataset.target)

    lines = format_metric_table(table, title=f"Metrics of '{args.scores}' (n={dataset.n})")
    lines += ["", "## Calibration curve", ""]
    lines += [f"{center:.4f}  {observed:.4f}  (n={count})"
              for center, observed, count in zip(curve.bin_centers, curve.mean_observed, curve.counts)]
    if curve.merged:
        lines.append(f"({curve.bin_count} of {curve.requested_bins} bins after merging ties)")
    if estimate.degenerate:
        lines.append("ICI from the constant-score branch")
    ConsoleWriter().write_lines(lines)

    if args.json:
        payload = {'metrics': table.to_dict(), 'ici_degenerate': estimate.degenerate,
                   'calibration': {'bin_centers': curve.bin_centers.tolist(),
                                   'mean_observed': curve.mean_observed.tolist(),
                                   'counts': curve.counts.tolist()}}
        FileWriter(args.json, args.force).write(json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """Derive report.md and SVG histograms from study outputs."""
    paths = write_report(args.dir, args.out, force=args.force)
    print(f"Wrote {paths[0]} and {len(paths) - 1} figure(s)")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    'simulate': cmd_simulate,
    'tree-study': cmd_tree_study,
    'select': cmd_select,
    'real-study': cmd_real_study,
    'resample': cmd_resample,
    'metrics': cmd_metrics,
    'report': cmd_report,
}


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--schema', metavar='PATH',
                        help='Schema TOML ([columns] name = kind); default: <csv stem>.schema.toml')
    parser.add_argument('--column', action='append', metavar='NAME=KIND',
                        help='Schema entry given inline; repeatable, replaces --schema')


def _add_selection_options(parser: argparse.ArgumentParser, default_learner: str = 'tree') -> None:
    parser.add_argument('--learner', choices=[k.value for k in LearnerKind], default=default_learner,
                        help=f'Learner whose grid is searched (default: {default_learner})')
    parser.add_argument('--grid-file', metavar='PATH',
                        help='TOML file with [tree] / [forest] / [boost] grid overrides')
    parser.add_argument('--criteria', type=criteria_list, metavar='LIST',
                        help='Comma-separated criteria, e.g. auc,kl (default: all)')


def _add_output_options(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument('--out', required=required, metavar='PATH', help='Output path')
    parser.add_argument('--force', action='store_true', help='Overwrite existing outputs')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='scoreshape',
        description='KL-divergence model selection for tree-based binary classifiers',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  scoreshape simulate --dgp 1 --n 30000 --out dgp1.csv
  scoreshape tree-study --dgp 1 --reps 10 --out results/dgp1_tree
  scoreshape tree-study --learner forest --noise 100 --reps 5 --out results/forest
  scoreshape real-study --csv data.csv --schema data.schema.toml --out results/data
  scoreshape report --dir results/dgp1_tree
        """,
    )
    parser.add_argument('--version', action='version', version=f'scoreshape v{__version__}')

    log_group = parser.add_argument_group('Logging Options')
    log_group.add_argument('-v', '--verbose', action='store_true',
                           help='Enable verbose logging (DEBUG level to console)')
    log_group.add_argument('-q', '--quiet', action='store_true',
                           help='Quiet mode - show only warnings and errors to console')
    log_group.add_argument('--log-file', metavar='PATH',
                           help=f'Custom log file path (default: {DEFAULT_LOG_FILE})')
    log_group.add_argument('--no-log-file', action='store_true', help='Disable file logging')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)

    p = commands.add_parser('simulate', help='Write a synthetic DGP sample as CSV')
    p.add_argument('--dgp', type=int, choices=config.DGP_IDS, required=True)
    p.add_argument('--n', type=positive_int, required=True, help='Number of observations')
    p.add_argument('--noise', type=int, choices=config.NOISE_LEVELS, default=0, help='Noise columns (default: 0)')
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.add_argument('--dgp4-resample', action='store_true',
                   help='Resample DGP4 toward the probability distribution of DGP1')
    p.add_argument('--epsilon', type=epsilon_value, default=0.05, help='KS tolerance for --dgp4-resample')
    p.add_argument('--no-true-prob', action='store_true', help='Omit the true_probability column')
    _add_output_options(p)

    p = commands.add_parser('tree-study', help='Replicated selection study on a synthetic DGP')
    p.add_argument('--config', metavar='PATH', help='Study TOML; flags given here override it')
    p.add_argument('--learner', choices=[k.value for k in LearnerKind])
    p.add_argument('--dgp', type=int, choices=config.DGP_IDS)
    p.add_argument('--noise', type=int, choices=config.NOISE_LEVELS)
    p.add_argument('--n', type=positive_int, help=f'Observations per split (default: {config.DEFAULT_N_PER_SPLIT})')
    p.add_argument('--reps', type=positive_int, help=f'Replications (default: {config.DEFAULT_REPLICATIONS})')
    p.add_argument('--seed', type=int, help=f'Master seed (default: {config.DEFAULT_SEED})')
    p.add_argument('--grid-file', metavar='PATH', help='TOML file with grid overrides')
    p.add_argument('--criteria', type=criteria_list, metavar='LIST', help='Comma-separated criteria')
    p.add_argument('--n-trees', type=positive_int, help='Trees per forest')
    p.add_argument('--no-extremes', action='store_true', help='Omit the smallest / largest rows')
    p.add_argument('--include-glm', action='store_true', help='Add a logistic-regression reference row')
    p.add_argument('--dgp4-resample', action='store_true', help='Resample DGP4 toward DGP1')
    p.add_argument('--epsilon', type=epsilon_value, help='KS tolerance for --dgp4-resample')
    _add_output_options(p)

    p = commands.add_parser('select', help='Grid search on a CSV with true probabilities')
    p.add_argument('--csv', required=True, metavar='PATH')
    _add_data_options(p)
    _add_selection_options(p)
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.add_argument('--no-extremes', action='store_true', help='Omit the smallest / largest rows')
    p.add_argument('--save-models', action='store_true', help='Write each selected model as JSON')
    _add_output_options(p)

    p = commands.add_parser('real-study', help='KL selection against a GLM-fitted Beta prior')
    p.add_argument('--csv', required=True, metavar='PATH')
    _add_data_options(p)
    _add_selection_options(p)
    p.add_argument('--prior', choices=['glm'], default='glm', help='Model whose scores fit the prior')
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    p.add_argument('--extremes', action='store_true', help='Add the smallest / largest rows')
    _add_output_options(p)

    p = commands.add_parser('resample', help='Rejection-resample a sample toward a Beta target')
    p.add_argument('--in', dest='input', required=True, metavar='PATH')
    _add_data_options(p)
    p.add_argument('--method', choices=['iterative', 'rejection'], default='iterative')
    target = p.add_mutually_exclusive_group()
    target.add_argument('--target-dgp', type=int, choices=config.DGP_IDS, default=1,
                        help='Target the Beta MLE fit of this DGP (default: 1)')
    target.add_argument('--target-beta', type=positive_float, nargs=2, metavar=('ALPHA', 'BETA'))
    p.add_argument('--epsilon', type=epsilon_value, default=0.05)
    p.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    _add_output_options(p)

    p = commands.add_parser('metrics', help='Metric table of a score column')
    p.add_argument('--in', dest='input', required=True, metavar='PATH')
    _add_data_options(p)
    p.add_argument('--scores', required=True, metavar='COLUMN', help='Numeric column holding the scores')
    p.add_argument('--prior-alpha', type=positive_float, help='Beta reference alpha (no true probabilities)')
    p.add_argument('--prior-beta', type=positive_float, help='Beta reference beta (no true probabilities)')
    p.add_argument('--bins', type=positive_int, default=config.DEFAULT_BIN_COUNT, help='Histogram bins')
    p.add_argument('--calibration-bins', type=positive_int, default=config.CALIBRATION_BINS)
    p.add_argument('--json', metavar='PATH', help='Also write the metrics as JSON')
    p.add_argument('--force', action='store_true', help='Overwrite the JSON file')

    p = commands.add_parser('report', help='Markdown and SVG report from a study directory')
    p.add_argument('--dir', required=True, metavar='PATH', help='Study output directory')
    p.add_argument('--out', metavar='PATH', help='Report directory (default: --dir)')
    p.add_argument('--force', action='store_true', help='Overwrite existing report files')

    return parser


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse and cross-validate command line arguments.

    Usage errors exit with code 2 before any data is touched.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose and args.quiet:
        parser.error("--verbose and --quiet are mutually exclusive")
    if args.command == 'metrics' and (args.prior_alpha is None) != (args.prior_beta is None):
        parser.error("--prior-alpha and --prior-beta must be given together")
    if args.command == 'simulate' and args.dgp4_resample and args.dgp != 4:
        parser.error("--dgp4-resample requires --dgp 4")
    if args.command in ('select', 'real-study', 'resample', 'metrics') and args.column and args.schema:
        parser.error("--column and --schema are mutually exclusive")
    return args


# ============================================================================
# ENTRY POINT
# ============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = parse_arguments(argv)
    setup_logging(verbose=args.verbose, quiet=args.quiet, log_file=args.log_file, no_log_file=args.no_log_file)
    logger.debug(f"scoreshape {__version__}: {args.command} with {vars(args)}")

    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 1
    except (ScoreshapeError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        logger.debug("Traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
