"""
Shared arguments and error handling of the classbench commands.

Commands implement run() instead of handle(). Every ClassbenchError or OSError becomes a CommandError, which
Django prints on stderr and turns into a nonzero exit code.
"""
import logging
import os
from typing import Any, Dict, List, Optional

import yaml
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from classbench.benchmark.logic import ClassbenchError, ConfigurationError
from classbench.benchmark.logic.data import SUPPORTED_FORMATS, Dataset, load_dataset_file
from classbench.benchmark.logic.harness import (ClassifierSpec, ComparisonTable, MajorityConfig, Runner,
                                                run_locally)
from classbench.benchmark.logic.imputation import ImputationConfig
from classbench.benchmark.logic.knn import WEIGHTINGS, KnnConfig
from classbench.benchmark.logic.mlp import MlpConfig
from classbench.benchmark.logic.report import FORMATS, emit_report, table_to_text

log = logging.getLogger(__package__)

CLASSIFIERS = ['knn', 'mlp', 'majority']


class BenchmarkCommand(BaseCommand):

    # there is no database to check
    requires_system_checks: List[str] = []

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except (ClassbenchError, OSError) as e:
            raise CommandError(str(e)) from e

    def run(self, **options):
        raise NotImplementedError

    def write_table(self, table: ComparisonTable, options: Dict[str, Any]) -> None:
        """Prints the table, and writes it as a report when --out is given."""
        self.stdout.write(table_to_text(table, include_timing=options.get('timing', False)))
        if options.get('out'):
            path = output_path(options['out'])
            emit_report(table, options.get('report_format') or report_format(path), path,
                        include_timing=options.get('timing', False))
            log.info(f"Report written to {path}.")


def add_dataset_arguments(parser) -> None:
    parser.add_argument('path', type=str, help='ARFF or CSV dataset.')
    parser.add_argument('--class-index', type=int, default=-1,
                        help='Index of the class attribute, negative counts from the end. Default: last.')
    parser.add_argument('--input-format', type=str, choices=SUPPORTED_FORMATS, default=None,
                        help='Read as this format instead of guessing from the file extension.')


def add_evaluation_arguments(parser) -> None:
    parser.add_argument('--folds', type=int, default=None,
                        help=f'Cross-validation folds. Default: {settings.CLASSBENCH_DEFAULT_FOLDS}.')
    parser.add_argument('--seeds', type=str, default=None,
                        help='Comma separated master seeds. Default: '
                             f'{",".join(str(s) for s in settings.CLASSBENCH_DEFAULT_SEEDS)}.')
    parser.add_argument('--global-normalization', action='store_true',
                        help='Normalize with bounds of the whole dataset instead of the training folds.')
    parser.add_argument('--celery', action='store_true',
                        help='Run the work units as celery tasks, on workers when BROKER is set.')


def add_classifier_arguments(parser, required: bool = True) -> None:
    parser.add_argument('--classifier', type=str, choices=CLASSIFIERS, required=required)
    parser.add_argument('--k', type=int, default=1, help='Neighbours for knn, odd.')
    parser.add_argument('--weighting', type=str, choices=WEIGHTINGS, default=WEIGHTINGS[0])
    parser.add_argument('--learning-rate', type=float, default=0.3)
    parser.add_argument('--momentum', type=float, default=0.2)
    parser.add_argument('--hidden-units', type=int, default=2)
    parser.add_argument('--epochs', type=int, default=None,
                        help=f'MLP training epochs. Default: {settings.CLASSBENCH_MLP_EPOCHS}.')


def add_imputation_arguments(parser) -> None:
    parser.add_argument('--m', type=int, default=None, help='Number of imputed datasets.')
    parser.add_argument('--burn-in', type=int, default=None, help='Markov chain steps before the first draw.')
    parser.add_argument('--thin', type=int, default=None, help='Markov chain steps between draws.')
    parser.add_argument('--imputation-seed', type=int, default=None)
    parser.add_argument('--include-class', action='store_true',
                        help='Also impute the class attribute instead of dropping instances without one.')


def add_output_arguments(parser) -> None:
    parser.add_argument('--out', type=str, default=None,
                        help=f'Report file, a bare file name is placed in {settings.OUTPUT_DIR}.')
    parser.add_argument('--format', dest='report_format', type=str, choices=FORMATS, default=None,
                        help='Report format. Default: from the file extension, csv otherwise.')
    parser.add_argument('--timing', action='store_true', help='Include wall time, reports are no longer stable.')


def load(options: Dict[str, Any]) -> Dataset:
    d = load_dataset_file(options['path'], class_index=options['class_index'], format=options.get('input_format'))
    log.info(f"Loaded {d.relation}: {d.n_instances} instances, {d.n_attributes} attributes, "
             f"{d.n_classes} classes.")
    return d


def parse_seeds(value: Optional[str]) -> List[int]:
    if not value:
        return list(settings.CLASSBENCH_DEFAULT_SEEDS)
    try:
        seeds = [int(seed) for seed in value.split(',') if seed.strip()]
    except ValueError:
        raise ConfigurationError(f"Seeds are comma separated integers, got {value}.")
    if not seeds:
        raise ConfigurationError("At least one seed is needed.")
    return seeds


def folds(options: Dict[str, Any]) -> int:
    return options.get('folds') or settings.CLASSBENCH_DEFAULT_FOLDS


def classifier(options: Dict[str, Any]) -> ClassifierSpec:
    kind = options['classifier']
    if kind == 'knn':
        return KnnConfig(k=options['k'], weighting=options['weighting'])
    if kind == 'mlp':
        return MlpConfig(learning_rate=options['learning_rate'], momentum=options['momentum'],
                         hidden_units=options['hidden_units'],
                         epochs=options.get('epochs') or settings.CLASSBENCH_MLP_EPOCHS)
    return MajorityConfig()


def imputation(options: Dict[str, Any]) -> ImputationConfig:
    return ImputationConfig.from_settings(m=options.get('m'), burn_in=options.get('burn_in'),
                                          thin=options.get('thin'), seed=options.get('imputation_seed'),
                                          include_class=options.get('include_class') or None)


def runner(options: Dict[str, Any]) -> Runner:
    if not options.get('celery'):
        return run_locally
    # imported here, the celery app is only configured when it is used
    from classbench.benchmark.tasks import celery_runner
    return celery_runner(os.path.abspath(options['path']), options['class_index'])


def read_yaml(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path} is not valid YAML: {e}")
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path} must contain a mapping.")
    return document


def output_path(path: str) -> str:
    if os.path.dirname(path):
        return path
    os.makedirs(settings.OUTPUT_DIR, exist_ok=True)
    return os.path.join(settings.OUTPUT_DIR, path)


def report_format(path: str) -> str:
    return 'json' if path.lower().endswith('.json') else 'csv'
