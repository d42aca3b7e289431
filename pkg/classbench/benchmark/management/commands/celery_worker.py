# example: classbench celery_worker worker -l info --concurrency 8
import logging
import os

from django.core.management.base import BaseCommand

log = logging.getLogger(__package__)


class Command(BaseCommand):
    """Celery command wrapper, runs celery with the classbench app."""

    help = __doc__

    requires_system_checks: list = []

    def run_from_argv(self, argv):
        """Replace python with celery process with given arguments."""
        appname = __name__.split('.', 1)[0] + '.celery:app'
        arguments = argv[1:2] + ['-A', appname] + argv[2:]
        # argv[1] is this command, celery sees it as its program name
        arguments[0] = 'celery'

        log.info(f"Starting celery: {' '.join(arguments)}")
        os.execvp('celery', arguments)
