import logging
import os

from classbench.benchmark.logic.harness import ExperimentConfig, experiment, missing_method
from classbench.benchmark.management.base import (BenchmarkCommand, add_classifier_arguments, add_dataset_arguments,
                                                  add_evaluation_arguments, add_imputation_arguments,
                                                  add_output_arguments, classifier, folds, imputation, load,
                                                  parse_seeds, runner)

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Cross-validates one classifier configuration over one or more seeds. ' \
           'Example: classbench eval data/iris.arff --classifier knn --k 9 --seeds 1,2,3 --out iris.csv'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        add_classifier_arguments(parser)
        parser.add_argument('--missing', type=str, default='default', help='default, mean-mode or mi')
        add_evaluation_arguments(parser)
        add_imputation_arguments(parser)
        add_output_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        d = load(options)
        name = os.path.splitext(os.path.basename(options['path']))[0]
        cfg = ExperimentConfig(
            dataset=name,
            classifier=classifier(options),
            missing_method=missing_method(options['missing']),
            imputation=imputation(options),
            folds=folds(options),
            seeds=tuple(parse_seeds(options['seeds'])),
            output=options['out'],
            global_normalization=options['global_normalization'],
        )
        self.write_table(experiment(d, cfg, name, runner=runner(options)), options)
