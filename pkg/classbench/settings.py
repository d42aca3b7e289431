import os

import sentry_sdk
from sentry_sdk.integrations.celery import CeleryIntegration
from sentry_sdk.integrations.django import DjangoIntegration

__version__ = '0.0.0'

"""
Django settings for classbench.

Everything that can differ between a laptop and a worker is read from the environment. There are no models,
the database setting only exists because Django wants one.
"""

BASE_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_DIR = os.path.dirname(BASE_DIR)

# Nothing is signed or served, but Django refuses to start without a key.
SECRET_KEY: str = os.environ.get('SECRET_KEY', 'classbench-is-not-a-website')

DEBUG = os.environ.get('DEBUG', False)

ALLOWED_HOSTS: list = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'classbench.benchmark',
]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('DB_NAME', os.path.join(PROJECT_DIR, 'classbench.sqlite3')),
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.AutoField'

USE_TZ = True
TIME_ZONE = 'UTC'

# Datasets fetched by fetch_datasets, and where the acceptance tests look for them.
DATA_DIR: str = os.environ.get('CLASSBENCH_DATA_DIR', os.path.join(PROJECT_DIR, 'data') + '/')

# Reports are written here when a command is given a bare file name.
OUTPUT_DIR: str = os.environ.get('CLASSBENCH_OUTPUT_DIR', os.path.join(PROJECT_DIR, 'output') + '/')

CLASSBENCH_DEFAULT_SEEDS = [int(seed) for seed in os.environ.get('CLASSBENCH_SEEDS', '1,2,3,4,5').split(',')]
CLASSBENCH_DEFAULT_FOLDS = int(os.environ.get('CLASSBENCH_FOLDS', 10))
CLASSBENCH_MLP_EPOCHS = int(os.environ.get('CLASSBENCH_MLP_EPOCHS', 500))
CLASSBENCH_KNN_QUERY_CHUNK = int(os.environ.get('CLASSBENCH_KNN_QUERY_CHUNK', 256))

# Markov chain and EM defaults, any of them can be overridden per command.
CLASSBENCH_IMPUTATION = {
    'm': 5,
    'burn_in': 200,
    'thin': 100,
    'em_tol': 1e-6,
    'em_max_iter': 1000,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',  # sys.stderr
            'formatter': 'color',
        },
    },
    'formatters': {
        'debug': {
            'format': '%(asctime)s\t%(levelname)-8s - %(filename)-20s:%(lineno)-4s - '
                      '%(funcName)20s() - %(message)s',
        },
        'color': {
            '()': 'colorlog.ColoredFormatter',
            'format': '%(log_color)s%(asctime)s\t%(levelname)-8s - '
                      '%(message)s',
            'datefmt': '%Y-%m-%d %H:%M',
            'log_colors': {
                'DEBUG': 'green',
                'INFO': 'white',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'bold_red',
            },
        }
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'INFO'),
        },
        'celery.app.trace': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'INFO'),
        },
        # all our modules log via __package__, so this catches everything of ours
        'classbench': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'INFO'),
        },
    },
}

CELERY_ACCEPT_CONTENT = ["json"]
CELERY_SERIALIZER = "json"
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_EVENT_SERIALIZER = "json"

# Without a broker every task runs in this process, in order. With one, sweeps are spread over
# `classbench celery_worker worker` processes.
BROKER = os.environ.get('BROKER', '')
CELERY_BROKER_URL = BROKER or 'memory://'
CELERY_RESULT_BACKEND = os.environ.get('CELERY_RESULT_BACKEND', 'cache+memory://' if not BROKER else BROKER)
CELERY_TASK_ALWAYS_EAGER = not BROKER
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_ENABLE_UTC = True
CELERY_TIMEZONE = 'UTC'
CELERY_BROKER_CONNECTION_RETRY = True

# A cross-validation of a big grid cell takes minutes, do not let a worker hoard them.
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_TASK_ACKS_LATE = True

SENTRY_DSN = os.environ.get('SENTRY_DSN')
if SENTRY_DSN:
    sentry_sdk.init(dsn=SENTRY_DSN, integrations=[CeleryIntegration(), DjangoIntegration()],
                    release=__version__, send_default_pii=False)
