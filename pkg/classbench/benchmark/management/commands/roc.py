import logging

from classbench.benchmark.logic import ConfigurationError
from classbench.benchmark.logic.data import Dataset
from classbench.benchmark.logic.harness import cross_validate, materialize, missing_method
from classbench.benchmark.logic.report import emit_roc
from classbench.benchmark.management.base import (BenchmarkCommand, add_classifier_arguments, add_dataset_arguments,
                                                  add_imputation_arguments, classifier, folds, imputation, load,
                                                  output_path)

log = logging.getLogger(__package__)


def positive_class(d: Dataset, value: str) -> int:
    """A class name, or the index of a class when no class has that name."""
    categories = d.class_attribute.categories
    if value in categories:
        return categories.index(value)
    try:
        index = int(value)
    except ValueError:
        raise ConfigurationError(f"Unknown class {value}, classes are: {', '.join(categories)}.")
    if not 0 <= index < len(categories):
        raise ConfigurationError(f"Class index {index} does not exist, there are {len(categories)} classes.")
    return index


class Command(BenchmarkCommand):
    help = 'Writes the ROC curve of a cross-validated classifier for one positive class. ' \
           'Example: classbench roc data/iris.arff --positive Iris-setosa --classifier mlp --out roc.csv'

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        parser.add_argument('--positive', type=str, required=True, help='Class name or index.')
        add_classifier_arguments(parser)
        parser.add_argument('--missing', type=str, default='default', help='default, mean-mode or mi')
        parser.add_argument('--folds', type=int, default=None)
        parser.add_argument('--seed', type=int, default=1)
        parser.add_argument('--out', type=str, required=True)
        add_imputation_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        d = load(options)
        positive = positive_class(d, options['positive'])

        completed = materialize(d, missing_method(options['missing']), imputation(options), options['seed'])
        if len(completed) > 1:
            log.info(f"Using the first of {len(completed)} imputed datasets for the ROC curve.")

        report = cross_validate(completed[0], classifier(options), folds(options), options['seed'],
                                positive=positive)
        if not report.roc:
            raise ConfigurationError(f"No ROC curve for {options['positive']}: it is absent or the only class.")

        path = output_path(options['out'])
        emit_roc(report.roc, path)
        self.stdout.write(f"{len(report.roc)} points written to {path}, "
                          f"TP rate {report.tp_rate[positive]:.4f}, FP rate {report.fp_rate[positive]:.4f}.")
