"""
Celery application for classbench.

Cross-validation work units are the only tasks. Without a BROKER they run eagerly, in this process.
"""
import logging
import os

from celery import Celery, Task

log = logging.getLogger(__package__)

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "classbench.settings")

app = Celery('classbench')
app.config_from_object('django.conf:settings', namespace='CELERY')
app.autodiscover_tasks(['classbench.benchmark'])


class DefaultTask(Task):
    """Default settings for all classbench tasks."""

    # Folds are deterministic: a failed unit fails again, there is nothing to gain from retrying it.
    max_retries = 0


app.Task = DefaultTask


def status():
    """Return a dictionary with the workers that are connected to the broker."""
    if app.conf.task_always_eager:
        return {'alerts': [], 'workers': [], 'eager': True}

    inspect = app.control.inspect()
    stats = inspect.stats() or {}
    active = inspect.active() or {}
    workers = [{
        'name': worker_name,
        'tasks_processed': sum(worker_stats['total'].values()),
        'tasks_active': len(active.get(worker_name, [])),
        'concurrency': worker_stats['pool']['max-concurrency'],
    } for worker_name, worker_stats in stats.items()]

    workers = sorted(workers, key=lambda k: (k['name']), reverse=False)

    alerts = []
    if not workers:
        alerts.append('No active workers!')

    return {'alerts': alerts, 'workers': workers, 'eager': False}
