import logging
import os

from classbench.benchmark.logic.harness import SweepGrid, missing_method, sweep
from classbench.benchmark.management.base import (BenchmarkCommand, add_dataset_arguments, add_evaluation_arguments,
                                                  add_imputation_arguments, add_output_arguments, folds, imputation,
                                                  load, parse_seeds, read_yaml, runner)

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Cross-validates every cell of a parameter grid, best cell first. ' \
           'Example: classbench sweep data/glass.arff --grid grids/knn.yaml --out glass_sweep.csv'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        parser.add_argument('--grid', type=str, required=True, help='YAML file with knn and/or mlp sections.')
        parser.add_argument('--missing', type=str, default='default', help='default, mean-mode or mi')
        add_evaluation_arguments(parser)
        add_imputation_arguments(parser)
        add_output_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        grid = SweepGrid.from_dict(read_yaml(options['grid']))
        d = load(options)
        name = os.path.splitext(os.path.basename(options['path']))[0]

        table = sweep(d, grid, folds=folds(options), seeds=parse_seeds(options['seeds']), name=name,
                      method=missing_method(options['missing']), imputation=imputation(options),
                      global_normalization=options['global_normalization'], runner=runner(options))
        self.write_table(table, options)

        best = table.best()
        if best:
            log.info(f"Best: {best.classifier} {best.parameters}, accuracy {best.accuracy:.4f}, rmse {best.rmse:.4f}")
