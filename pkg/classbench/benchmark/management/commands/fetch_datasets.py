import logging

from django.conf import settings

from classbench.benchmark.logic.catalogue import CATALOGUE, fetch
from classbench.benchmark.management.base import BenchmarkCommand

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Downloads catalogued UCI datasets and stores them as ARFF. ' \
           'Example: classbench fetch_datasets --dataset iris --dataset glass'

    def add_arguments(self, parser):
        parser.add_argument('--dataset', type=str, action='append', choices=list(CATALOGUE), default=None,
                            help='Can be repeated. Default: every catalogued dataset.')
        parser.add_argument('--data-dir', type=str, default=None, help=f'Default: {settings.DATA_DIR}')
        parser.add_argument('--record-checksums', action='store_true',
                            help='Store the sha256 of each download as the expected checksum.')
        parser.add_argument('--no-verify', action='store_true', help='Do not check downloads against known checksums.')
        super().add_arguments(parser)

    def run(self, **options):
        for name in options['dataset'] or list(CATALOGUE):
            path = fetch(name, data_dir=options['data_dir'], verify=not options['no_verify'],
                         record=options['record_checksums'])
            self.stdout.write(path)
