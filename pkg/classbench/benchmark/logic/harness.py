"""
Cross-validation, parameter sweeps and comparisons of missing value methods.

Every experiment is cut in work units: one classifier configuration, one missing value method and one
master seed. A unit does a full stratified cross-validation (on each of the m completed datasets under
multiple imputation) and is independent of all other units, so units can run in any order or on celery
workers. Random numbers per fold come from (master seed, fold), never from global state.

Results are collected in a ComparisonTable with one row per seed and, for more than one seed, an aggregate
row per configuration (seed 'all', mean and standard deviation over the seeds).
"""
import logging
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings

from classbench.benchmark.logic import ConfigurationError, DatasetError
from classbench.benchmark.logic import knn, mlp
from classbench.benchmark.logic.data import (Dataset, drop_missing_class, nominal_to_binary, normalization_bounds,
                                             normalize, select_rows, stratified_folds)
from classbench.benchmark.logic.imputation import ImputationConfig, mean_mode_impute, multiple_impute, with_seed
from classbench.benchmark.logic.knn import KnnConfig
from classbench.benchmark.logic.metrics import EvaluationReport, evaluate
from classbench.benchmark.logic.mlp import MlpConfig

log = logging.getLogger(__package__)

DEFAULT = 'default'
MEAN_MODE = 'mean_mode'
MULTIPLE_IMPUTATION = 'multiple_imputation'
MISSING_METHODS = [DEFAULT, MEAN_MODE, MULTIPLE_IMPUTATION]

# spellings accepted on the command line and in experiment files
MISSING_METHOD_ALIASES = {
    'default': DEFAULT, 'ignore': DEFAULT,
    'mean-mode': MEAN_MODE, 'mean_mode': MEAN_MODE,
    'mi': MULTIPLE_IMPUTATION, 'multiple-imputation': MULTIPLE_IMPUTATION,
    'multiple_imputation': MULTIPLE_IMPUTATION,
}


@dataclass(frozen=True)
class MajorityConfig:
    """Baseline: always predicts the most frequent training class, with the training class prior."""

    @property
    def label(self) -> str:
        return 'Majority'

    def parameters(self) -> str:
        return ''


ClassifierSpec = Union[KnnConfig, MlpConfig, MajorityConfig]


def missing_method(name: str) -> str:
    try:
        return MISSING_METHOD_ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"Unknown missing value method {name}, use one of "
                                 f"{', '.join(sorted(MISSING_METHOD_ALIASES))}.")


def spec_to_dict(spec: ClassifierSpec) -> Dict[str, Any]:
    if isinstance(spec, KnnConfig):
        return {'classifier': 'knn', 'k': spec.k, 'weighting': spec.weighting}
    if isinstance(spec, MlpConfig):
        return {'classifier': 'mlp', 'learning_rate': spec.learning_rate, 'momentum': spec.momentum,
                'hidden_units': spec.hidden_units, 'epochs': spec.epochs, 'seed': spec.seed}
    return {'classifier': 'majority'}


def spec_from_dict(data: Dict[str, Any]) -> ClassifierSpec:
    data = dict(data)
    kind = data.pop('classifier', None)
    try:
        if kind == 'knn':
            return KnnConfig(**data)
        if kind == 'mlp':
            data.setdefault('epochs', settings.CLASSBENCH_MLP_EPOCHS)
            return MlpConfig(**data)
        if kind == 'majority':
            return MajorityConfig()
    except TypeError as e:
        raise ConfigurationError(f"Invalid {kind} settings: {e}")
    raise ConfigurationError(f"Unknown classifier {kind}, use knn, mlp or majority.")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    classifier: ClassifierSpec
    missing_method: str = DEFAULT
    imputation: Optional[ImputationConfig] = None
    folds: int = 10
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    output: Optional[str] = None
    global_normalization: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigurationError(f"Cross-validation needs at least 2 folds, got {self.folds}.")
        if not self.seeds:
            raise ConfigurationError("At least one seed is needed.")
        if self.missing_method not in MISSING_METHODS:
            raise ConfigurationError(f"Unknown missing value method {self.missing_method}.")

    def units(self) -> List['WorkUnit']:
        return [WorkUnit(classifier=self.classifier, missing_method=self.missing_method, seed=seed,
                         folds=self.folds, imputation=self.imputation,
                         global_normalization=self.global_normalization)
                for seed in self.seeds]


@dataclass(frozen=True)
class SweepGrid:
    k: Tuple[int, ...] = ()
    weighting: Tuple[str, ...] = ()
    learning_rate: Tuple[float, ...] = ()
    momentum: Tuple[float, ...] = ()
    hidden_units: Tuple[int, ...] = ()
    epochs: int = 500

    def __post_init__(self):
        has_knn = bool(self.k or self.weighting)
        has_mlp = bool(self.learning_rate or self.momentum or self.hidden_units)
        if not has_knn and not has_mlp:
            raise ConfigurationError("The grid is empty, give knn and/or mlp parameter lists.")
        if has_knn and not (self.k and self.weighting):
            raise ConfigurationError("A knn grid needs both a k list and a weighting list.")
        if has_mlp and not (self.learning_rate and self.momentum and self.hidden_units):
            raise ConfigurationError("An mlp grid needs learning_rate, momentum and hidden_units lists.")
        even = [k for k in self.k if k % 2 == 0]
        if even:
            raise ConfigurationError(f"All k must be odd, got {even}.")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SweepGrid':
        """Reads the parsed sweep file: optional `knn` and `mlp` sections with parameter lists."""
        if not isinstance(data, dict):
            raise ConfigurationError("A sweep grid is a mapping with knn and/or mlp sections.")
        unknown = set(data) - {'knn', 'mlp'}
        if unknown:
            raise ConfigurationError(f"Unknown sweep sections: {', '.join(sorted(unknown))}.")

        knn_section = data.get('knn') or {}
        mlp_section = data.get('mlp') or {}
        return cls(
            k=tuple(int(k) for k in knn_section.get('k', [])),
            weighting=tuple(knn_section.get('weighting', [knn.UNIFORM] if knn_section else [])),
            learning_rate=tuple(float(v) for v in mlp_section.get('learning_rate', [])),
            momentum=tuple(float(v) for v in mlp_section.get('momentum', [])),
            hidden_units=tuple(int(v) for v in mlp_section.get('hidden_units', [])),
            epochs=int(mlp_section.get('epochs', settings.CLASSBENCH_MLP_EPOCHS)),
        )

    def specs(self) -> List[ClassifierSpec]:
        specs: List[ClassifierSpec] = [KnnConfig(k=k, weighting=w) for w, k in product(self.weighting, self.k)]
        specs += [MlpConfig(learning_rate=a, momentum=b, hidden_units=h, epochs=self.epochs)
                  for a, b, h in product(self.learning_rate, self.momentum, self.hidden_units)]
        return specs


@dataclass(frozen=True)
class WorkUnit:
    classifier: ClassifierSpec
    missing_method: str
    seed: int
    folds: int
    imputation: Optional[ImputationConfig] = None
    global_normalization: bool = False
    positive: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'classifier': spec_to_dict(self.classifier),
            'missing_method': self.missing_method,
            'seed': self.seed,
            'folds': self.folds,
            'imputation': asdict(self.imputation) if self.imputation else None,
            'global_normalization': self.global_normalization,
            'positive': self.positive,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WorkUnit':
        return cls(
            classifier=spec_from_dict(data['classifier']),
            missing_method=data['missing_method'],
            seed=int(data['seed']),
            folds=int(data['folds']),
            imputation=ImputationConfig(**data['imputation']) if data.get('imputation') else None,
            global_normalization=bool(data.get('global_normalization', False)),
            positive=int(data.get('positive', 0)),
        )


@dataclass
class UnitResult:
    """Metrics of one unit: mean and sd over the completed datasets (a single one unless imputed m times)."""
    unit: WorkUnit
    accuracy: float
    accuracy_sd: float
    rmse: float
    rmse_sd: float
    kappa: float
    kappa_sd: float
    wall_time: float
    reports: List[EvaluationReport] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'unit': self.unit.to_dict(), 'accuracy': self.accuracy, 'accuracy_sd': self.accuracy_sd,
                'rmse': self.rmse, 'rmse_sd': self.rmse_sd, 'kappa': self.kappa, 'kappa_sd': self.kappa_sd,
                'wall_time': self.wall_time}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'UnitResult':
        values = {key: float(data[key]) for key in
                  ['accuracy', 'accuracy_sd', 'rmse', 'rmse_sd', 'kappa', 'kappa_sd', 'wall_time']}
        return cls(unit=WorkUnit.from_dict(data['unit']), **values)


@dataclass
class ResultRow:
    dataset: str
    classifier: str
    missing_method: str
    parameters: str
    seed: str
    accuracy: float
    accuracy_sd: float
    rmse: float
    rmse_sd: float
    kappa: float
    kappa_sd: float
    best: bool = False
    wall_time: float = 0.0


@dataclass
class ComparisonTable:
    rows: List[ResultRow]
    # the reports behind the rows, by (dataset, classifier, parameters, missing method, seed)
    reports: Dict[Tuple[str, str, str, str, int], List[EvaluationReport]] = field(default_factory=dict,
                                                                                  compare=False)

    def aggregates(self) -> List[ResultRow]:
        seeds = {row.seed for row in self.rows}
        return [row for row in self.rows if row.seed == 'all'] if 'all' in seeds else list(self.rows)

    def best(self) -> Optional[ResultRow]:
        return next((row for row in self.rows if row.best), None)


# --- one cross-validation ---


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _knn_fold(train: Dataset, test: Dataset, cfg: KnnConfig, bounds) -> np.ndarray:
    bounds = bounds or normalization_bounds(train)
    return knn.predict_proba(normalize(train, bounds), normalize(test, bounds), cfg)


def _mlp_folds(parts: List[Tuple[Dataset, Dataset]], cfg: MlpConfig, seed: int, bounds) -> List[np.ndarray]:
    """Missing cells get training mean/mode, then normalization and binary encoding, then all folds train."""
    train_sets, test_sets = [], []
    for train, test in parts:
        filled_train = mean_mode_impute(train)
        filled_test = mean_mode_impute(test, reference=train)
        fold_bounds = bounds or normalization_bounds(filled_train)
        train_sets.append(nominal_to_binary(normalize(filled_train, fold_bounds)))
        test_sets.append(nominal_to_binary(normalize(filled_test, fold_bounds)))

    cfgs = [replace(cfg, seed=fold_seed(seed, fold)) for fold in range(len(parts))]
    networks = mlp.train_many(train_sets, cfgs)
    return [mlp.predict_proba(network, test.predictors()) for network, test in zip(networks, test_sets)]


def _majority_fold(train: Dataset, test: Dataset) -> np.ndarray:
    prior = np.bincount(train.labels(), minlength=train.n_classes) / train.n_instances
    return np.tile(prior, (test.n_instances, 1))


def cross_validate(d: Dataset, spec: ClassifierSpec, folds: int, seed: int, global_normalization: bool = False,
                   positive: int = 0) -> EvaluationReport:
    """
    Stratified k-fold cross-validation. Preprocessing statistics come from the training partition of each
    fold, unless global_normalization is set. Predictions of all folds are pooled into a single report.
    """
    if not 0 <= positive < d.n_classes:
        raise ConfigurationError(f"Positive class {positive} does not exist, there are {d.n_classes} classes.")

    split = stratified_folds(d, folds, seed)
    labels = d.labels()
    bounds = normalization_bounds(d) if global_normalization else None

    smallest = d.n_instances - max(len(fold) for fold in split.folds)
    if isinstance(spec, KnnConfig) and spec.k > smallest:
        raise ConfigurationError(f"k={spec.k} is larger than the smallest training partition ({smallest} "
                                 f"instances), use a smaller k or fewer folds.")

    start = time.perf_counter()
    parts = [(select_rows(d, split.train_indices(f)), select_rows(d, split.test_indices(f))) for f in range(folds)]

    if isinstance(spec, MlpConfig):
        predictions = _mlp_folds(parts, spec, seed, bounds)
    elif isinstance(spec, KnnConfig):
        predictions = [_knn_fold(train, test, spec, bounds) for train, test in parts]
    else:
        predictions = [_majority_fold(train, test) for train, test in parts]

    probabilities = np.zeros((d.n_instances, d.n_classes))
    for fold, prediction in enumerate(predictions):
        probabilities[split.test_indices(fold)] = prediction
    wall_time = time.perf_counter() - start

    return evaluate(probabilities, labels, positive=positive, wall_time=wall_time)


# --- work units ---


def materialize(d: Dataset, method: str, imputation: Optional[ImputationConfig], seed: int) -> List[Dataset]:
    """The dataset(s) a classifier is evaluated on under a missing value method, without instances lacking a class."""
    if method == DEFAULT:
        return [drop_missing_class(d)]

    imputation = imputation or ImputationConfig.from_settings()
    if method == MEAN_MODE:
        return [drop_missing_class(mean_mode_impute(d, include_class=imputation.include_class))]
    if method == MULTIPLE_IMPUTATION:
        return [drop_missing_class(completed) for completed in multiple_impute(d, with_seed(imputation, seed))]
    raise ConfigurationError(f"Unknown missing value method {method}.")


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1)) if values.size > 1 else 0.0


def execute_unit(d: Dataset, unit: WorkUnit, completed: Optional[List[Dataset]] = None) -> UnitResult:
    completed = completed or materialize(d, unit.missing_method, unit.imputation, unit.seed)
    reports = [cross_validate(c, unit.classifier, unit.folds, unit.seed, unit.global_normalization, unit.positive)
               for c in completed]

    accuracy, accuracy_sd = _mean_sd([r.accuracy for r in reports])
    rmse, rmse_sd = _mean_sd([r.rmse for r in reports])
    kappa, kappa_sd = _mean_sd([r.kappa for r in reports])
    log.info(f"{unit.classifier.label} {unit.classifier.parameters()} {unit.missing_method} seed {unit.seed}: "
             f"accuracy {accuracy:.4f} rmse {rmse:.4f} kappa {kappa:.4f}")

    return UnitResult(unit=unit, accuracy=accuracy, accuracy_sd=accuracy_sd, rmse=rmse, rmse_sd=rmse_sd,
                      kappa=kappa, kappa_sd=kappa_sd, wall_time=float(np.mean([r.wall_time for r in reports])),
                      reports=reports)


Runner = Callable[[Dataset, List[WorkUnit]], List[UnitResult]]


def run_locally(d: Dataset, units: List[WorkUnit]) -> List[UnitResult]:
    """Runs units one after the other in this process. Completed datasets are shared between units."""
    cache: Dict[Tuple[str, Optional[ImputationConfig], int], List[Dataset]] = {}
    results = []
    for unit in units:
        key = (unit.missing_method, unit.imputation, unit.seed if unit.missing_method == MULTIPLE_IMPUTATION else 0)
        if key not in cache:
            cache[key] = materialize(d, unit.missing_method, unit.imputation, unit.seed)
        results.append(execute_unit(d, unit, cache[key]))
    return results


# --- tables ---


def _configuration(result: UnitResult) -> Tuple[str, str, str]:
    spec = result.unit.classifier
    return spec.label, spec.parameters(), result.unit.missing_method


def build_table(dataset: str, results: List[UnitResult], sort: bool = True) -> ComparisonTable:
    """
    Rows per configuration: one per seed, then an aggregate row when there is more than one seed.
    With sort, configurations are ordered by mean accuracy (descending), then RMSE (ascending). The best
    configuration by that order is flagged in any case.
    """
    if not results:
        raise ConfigurationError("No results to put in a table.")

    grouped: Dict[Tuple[str, str, str], List[UnitResult]] = OrderedDict()
    for result in results:
        grouped.setdefault(_configuration(result), []).append(result)

    summaries = []
    for (label, parameters, method), group in grouped.items():
        group = sorted(group, key=lambda r: r.unit.seed)
        accuracy, accuracy_sd = _mean_sd([r.accuracy for r in group])
        rmse, rmse_sd = _mean_sd([r.rmse for r in group])
        kappa, kappa_sd = _mean_sd([r.kappa for r in group])
        aggregate = ResultRow(dataset=dataset, classifier=label, missing_method=method, parameters=parameters,
                              seed='all', accuracy=accuracy, accuracy_sd=accuracy_sd, rmse=rmse, rmse_sd=rmse_sd,
                              kappa=kappa, kappa_sd=kappa_sd,
                              wall_time=float(np.mean([r.wall_time for r in group])))
        summaries.append((aggregate, group))

    ranking = sorted(range(len(summaries)), key=lambda i: (-summaries[i][0].accuracy, summaries[i][0].rmse, i))
    if sort:
        summaries = [summaries[i] for i in ranking]
        best_position = 0
    else:
        best_position = ranking[0]

    table = ComparisonTable(rows=[])
    for position, (aggregate, group) in enumerate(summaries):
        for result in group:
            table.rows.append(ResultRow(
                dataset=dataset, classifier=aggregate.classifier, missing_method=aggregate.missing_method,
                parameters=aggregate.parameters, seed=str(result.unit.seed), accuracy=result.accuracy,
                accuracy_sd=result.accuracy_sd, rmse=result.rmse, rmse_sd=result.rmse_sd, kappa=result.kappa,
                kappa_sd=result.kappa_sd, wall_time=result.wall_time,
                best=position == best_position and len(group) == 1,
            ))
            key = (dataset, aggregate.classifier, aggregate.parameters, aggregate.missing_method, result.unit.seed)
            table.reports[key] = result.reports
        if len(group) > 1:
            aggregate.best = position == best_position
            table.rows.append(aggregate)
    return table


def merge_tables(tables: Sequence[ComparisonTable]) -> ComparisonTable:
    merged = ComparisonTable(rows=[])
    for table in tables:
        merged.rows.extend(table.rows)
        merged.reports.update(table.reports)
    return merged


# --- experiments ---


def experiment(d: Dataset, cfg: ExperimentConfig, name: str, runner: Runner = run_locally) -> ComparisonTable:
    return build_table(name, runner(d, cfg.units()))


def sweep(d: Dataset, grid: SweepGrid, folds: int, seeds: Sequence[int], name: str = 'dataset',
          method: str = DEFAULT, imputation: Optional[ImputationConfig] = None, global_normalization: bool = False,
          runner: Runner = run_locally) -> ComparisonTable:
    """Every grid cell for every seed, sorted with the best cell first."""
    if not seeds:
        raise ConfigurationError("At least one seed is needed.")
    units = [WorkUnit(classifier=spec, missing_method=method, seed=seed, folds=folds, imputation=imputation,
                      global_normalization=global_normalization)
             for spec, seed in product(grid.specs(), seeds)]
    log.info(f"Sweeping {len(grid.specs())} configurations over {len(seeds)} seeds on {name}.")
    return build_table(name, runner(d, units))


def compare_missing_methods(d: Dataset, specs: Sequence[ClassifierSpec], methods: Sequence[str], folds: int,
                            seeds: Sequence[int], name: str = 'dataset',
                            imputation: Optional[ImputationConfig] = None, global_normalization: bool = False,
                            runner: Runner = run_locally) -> ComparisonTable:
    """Each method completes the data once per seed, then every classifier is cross-validated on the result."""
    if not d.has_missing:
        log.info(f"{name} has no missing values, every method will give the same results.")
    if not specs or not methods or not seeds:
        raise ConfigurationError("Need at least one classifier, one method and one seed.")

    units = [WorkUnit(classifier=spec, missing_method=method, seed=seed, folds=folds, imputation=imputation,
                      global_normalization=global_normalization)
             for method, spec, seed in product(methods, specs, seeds)]
    return build_table(name, runner(d, units), sort=False)


def compare_classifiers(datasets: Dict[str, Dataset], specs: Dict[str, Sequence[ClassifierSpec]], folds: int,
                        seeds: Sequence[int], runner: Runner = run_locally) -> ComparisonTable:
    """Classifiers per dataset under the default missing value handling, one block of rows per dataset."""
    missing = set(datasets) - set(specs)
    if missing:
        raise DatasetError(f"No classifiers given for {', '.join(sorted(missing))}.")

    tables = []
    for name, d in datasets.items():
        units = [WorkUnit(classifier=spec, missing_method=DEFAULT, seed=seed, folds=folds)
                 for spec, seed in product(specs[name], seeds)]
        tables.append(build_table(name, runner(d, units), sort=False))
    return merge_tables(tables)
