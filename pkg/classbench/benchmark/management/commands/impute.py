import logging
import os
from dataclasses import asdict

from classbench.benchmark.logic import ConfigurationError
from classbench.benchmark.logic.data import save_dataset_file
from classbench.benchmark.logic.harness import MEAN_MODE, MULTIPLE_IMPUTATION, missing_method
from classbench.benchmark.logic.imputation import impute_summary, mean_mode_impute, run_multiple_imputation
from classbench.benchmark.logic.report import emit_imputation_sidecar
from classbench.benchmark.management.base import (BenchmarkCommand, add_dataset_arguments, add_imputation_arguments,
                                                  imputation, load, output_path)

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Fills in missing values. With --method mi, --out data/x.arff writes data/x_1.arff ... data/x_m.arff ' \
           'and data/x.imputation.json. Example: classbench impute data/echo.arff --method mi --m 5 --out echo.arff'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        parser.add_argument('--method', type=str, required=True, help='mean-mode or mi')
        parser.add_argument('--seed', type=int, default=None, help='Seed of the Markov chain.')
        parser.add_argument('--out', type=str, required=True)
        add_imputation_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        method = missing_method(options['method'])
        if method not in [MEAN_MODE, MULTIPLE_IMPUTATION]:
            raise ConfigurationError(f"Can only impute with mean-mode or mi, got {options['method']}.")

        d = load(options)
        out = output_path(options['out'])

        if options['seed'] is not None:
            options['imputation_seed'] = options['seed']
        cfg = imputation(options)

        if method == MEAN_MODE:
            save_dataset_file(mean_mode_impute(d, include_class=cfg.include_class), out)
            self.stdout.write(out)
            return

        result = run_multiple_imputation(d, cfg)
        base, extension = os.path.splitext(out)
        for number, completed in enumerate(result.datasets, start=1):
            path = f"{base}_{number}{extension}"
            save_dataset_file(completed, path)
            self.stdout.write(path)

        sidecar = f"{base}.imputation.json"
        emit_imputation_sidecar(sidecar, asdict(cfg), result.em_iterations, impute_summary(d, result.datasets))
        self.stdout.write(sidecar)
        log.info(f"Wrote {cfg.m} imputed datasets, EM converged in {result.em_iterations} iterations.")
