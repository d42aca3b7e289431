import logging

from django.conf import settings

from classbench.benchmark.logic.catalogue import CATALOGUE, load_catalogued, preset
from classbench.benchmark.logic.harness import compare_classifiers
from classbench.benchmark.management.base import BenchmarkCommand, add_output_arguments, folds, parse_seeds

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Cross-validates the preset classifiers on catalogued datasets, one block of rows per dataset. ' \
           'Fetch the datasets first with fetch_datasets. Example: classbench benchmark --datasets iris,glass'

    def add_arguments(self, parser):
        parser.add_argument('--datasets', type=str, default=None,
                            help=f'Comma separated. Default: {",".join(CATALOGUE)}.')
        parser.add_argument('--data-dir', type=str, default=None, help=f'Default: {settings.DATA_DIR}')
        parser.add_argument('--epochs', type=int, default=None,
                            help=f'MLP training epochs. Default: {settings.CLASSBENCH_MLP_EPOCHS}.')
        parser.add_argument('--folds', type=int, default=None)
        parser.add_argument('--seeds', type=str, default=None, help='Comma separated master seeds.')
        add_output_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        names = options['datasets'].split(',') if options['datasets'] else list(CATALOGUE)
        datasets = {name: load_catalogued(name, options['data_dir']) for name in names}
        specs = {name: preset(name, epochs=options['epochs']).specs() for name in names}

        table = compare_classifiers(datasets, specs, folds=folds(options), seeds=parse_seeds(options['seeds']))
        self.write_table(table, options)
