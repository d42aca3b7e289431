default_app_config = 'classbench.benchmark.apps.BenchmarkConfig'
