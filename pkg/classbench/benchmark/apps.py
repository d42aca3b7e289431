from django.apps import AppConfig


class BenchmarkConfig(AppConfig):
    name = 'classbench.benchmark'
    verbose_name = 'Classifier benchmark'
