import logging
import os
from dataclasses import asdict
from typing import Any, Dict, List

from classbench.benchmark.logic import ConfigurationError
from classbench.benchmark.logic.catalogue import preset
from classbench.benchmark.logic.harness import (ClassifierSpec, compare_missing_methods, missing_method,
                                                spec_from_dict)
from classbench.benchmark.logic.imputation import ImputationConfig
from classbench.benchmark.management.base import (BenchmarkCommand, add_classifier_arguments, add_dataset_arguments,
                                                  add_evaluation_arguments, add_imputation_arguments,
                                                  add_output_arguments, classifier, folds, imputation, load,
                                                  parse_seeds, read_yaml, runner)

log = logging.getLogger(__package__)

DEFAULT_METHODS = 'mean-mode,mi'


class Command(BenchmarkCommand):
    help = 'Compares missing value methods for one or more classifiers. Classifiers come from a catalogue ' \
           'preset, a YAML config or the classifier flags. ' \
           'Example: classbench compare_missing data/echocardiogram.arff --preset echocardiogram'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        parser.add_argument('--preset', type=str, default=None, help='Use the classifiers of a catalogued dataset.')
        parser.add_argument('--config', type=str, default=None,
                            help='YAML with a classifiers list and optionally methods, folds, seeds and imputation.')
        parser.add_argument('--methods', type=str, default=None, help=f'Default: {DEFAULT_METHODS}')
        add_classifier_arguments(parser, required=False)
        add_evaluation_arguments(parser)
        add_imputation_arguments(parser)
        add_output_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        config: Dict[str, Any] = read_yaml(options['config']) if options['config'] else {}
        specs = self.classifiers(options, config)

        methods = options['methods'] or config.get('methods') or DEFAULT_METHODS
        if isinstance(methods, str):
            methods = methods.split(',')
        methods = [missing_method(method) for method in methods]

        cfg = imputation(options)
        if config.get('imputation'):
            try:
                cfg = ImputationConfig(**{**asdict(cfg), **config['imputation']})
            except TypeError as e:
                raise ConfigurationError(f"Invalid imputation settings in {options['config']}: {e}")

        seeds = parse_seeds(options['seeds']) if options['seeds'] else config.get('seeds') or parse_seeds(None)
        n_folds = options['folds'] or config.get('folds') or folds(options)
        d = load(options)
        name = os.path.splitext(os.path.basename(options['path']))[0]

        table = compare_missing_methods(d, specs, methods, folds=int(n_folds), seeds=[int(seed) for seed in seeds],
                                        name=name, imputation=cfg,
                                        global_normalization=options['global_normalization'], runner=runner(options))
        self.write_table(table, options)

    @staticmethod
    def classifiers(options: Dict[str, Any], config: Dict[str, Any]) -> List[ClassifierSpec]:
        chosen = [bool(options['preset']), bool(config.get('classifiers')), bool(options['classifier'])]
        if sum(chosen) != 1:
            raise ConfigurationError("Give exactly one of --preset, a config with classifiers, or --classifier.")

        if options['preset']:
            return preset(options['preset'], epochs=options['epochs']).specs()
        if options['classifier']:
            return [classifier(options)]
        if not isinstance(config['classifiers'], list):
            raise ConfigurationError("classifiers in the config must be a list.")
        return [spec_from_dict(spec) for spec in config['classifiers']]
