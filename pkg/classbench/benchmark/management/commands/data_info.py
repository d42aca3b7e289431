import logging

from tabulate import tabulate

from classbench.benchmark.logic.data import class_distribution
from classbench.benchmark.logic.imputation import missingness_summary
from classbench.benchmark.management.base import BenchmarkCommand, add_dataset_arguments, load

log = logging.getLogger(__package__)


class Command(BenchmarkCommand):
    help = 'Shows the attributes, class distribution and missing values of a dataset. ' \
           'Example: classbench data_info data/iris.arff'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        d = load(options)
        summary = missingness_summary(d)

        self.stdout.write(f"Relation: {d.relation}")
        self.stdout.write(f"Instances: {d.n_instances}, attributes: {d.n_attributes}, classes: {d.n_classes}")
        self.stdout.write("")

        rows = []
        for attribute in d.schema:
            kind = f"{attribute.kind} ({len(attribute.categories)})" if attribute.is_nominal else attribute.kind
            role = 'class' if attribute.index == d.class_index else ''
            rows.append([attribute.index, attribute.name, kind, role,
                         f"{summary.attribute_fractions[attribute.name] * 100:.1f}%"])
        self.stdout.write(tabulate(rows, headers=['#', 'attribute', 'type', 'role', 'missing']))
        self.stdout.write("")

        distribution = class_distribution(d)
        self.stdout.write(tabulate([[name, count] for name, count in distribution.items()],
                                   headers=['class', 'instances']))
        self.stdout.write("")

        self.stdout.write(f"Missing cells: {summary.overall * 100:.2f}%, in {summary.affected_attributes} "
                          f"attributes and {summary.affected_instances} instances.")
