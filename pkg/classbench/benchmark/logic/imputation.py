"""
Missing value handling.

mean/mode replacement
    Numeric cells get the column mean, nominal cells the most frequent category.

multiple imputation
    The attributes are modelled as one multivariate normal. EM gives the maximum likelihood mean and
    covariance, which start a data augmentation chain: the I-step draws the missing cells from their
    conditional normal given the observed cells, the P-step draws a new mean and covariance given the
    completed data. After burn-in a completed dataset is kept every `thin` steps until there are m.

Nominal attributes take part in the normal model as their category index and are rounded to the nearest
category afterwards. This is crude, but it is how a normal model gets applied to mixed data.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from scipy import linalg
from scipy.stats import invwishart

from classbench.benchmark.logic import EmConvergenceError, ImputationError
from classbench.benchmark.logic.data import Dataset, drop_missing_class

log = logging.getLogger(__package__)

RIDGE_FACTOR = 1e-8
SYMMETRY_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class NormalModelState:
    mean: np.ndarray
    covariance: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        covariance = np.atleast_2d(np.array(self.covariance, dtype=float))
        if covariance.shape != (mean.size, mean.size):
            raise ImputationError(f"A mean of {mean.size} needs a {mean.size}x{mean.size} covariance, "
                                  f"got {covariance.shape}.")
        if not np.allclose(covariance, covariance.T, rtol=0, atol=SYMMETRY_TOLERANCE):
            raise ImputationError("The covariance matrix is not symmetric.")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'covariance', covariance)


@dataclass(frozen=True)
class ImputationConfig:
    m: int = 5
    burn_in: int = 200
    thin: int = 100
    seed: int = 0
    em_tol: float = 1e-6
    em_max_iter: int = 1000
    include_class: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ImputationError(f"Need at least one imputation, got m={self.m}.")
        if self.burn_in < 0:
            raise ImputationError(f"Burn-in can not be negative, got {self.burn_in}.")
        if self.thin < 1:
            raise ImputationError(f"Thin must be 1 or more, got {self.thin}.")
        if self.em_tol <= 0:
            raise ImputationError(f"The EM tolerance must be positive, got {self.em_tol}.")
        if self.em_max_iter < 1:
            raise ImputationError(f"EM needs at least one iteration, got {self.em_max_iter}.")

    @classmethod
    def from_settings(cls, **overrides) -> 'ImputationConfig':
        values = dict(settings.CLASSBENCH_IMPUTATION)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def parameters(self) -> str:
        return f"m={self.m} burn_in={self.burn_in} thin={self.thin} seed={self.seed}"


@dataclass(frozen=True)
class MissingnessSummary:
    attribute_fractions: Dict[str, float]
    overall: float
    affected_attributes: int
    affected_instances: int


@dataclass
class MultipleImputation:
    datasets: List[Dataset]
    em_iterations: int
    columns: List[int] = field(default_factory=list)


def missingness_summary(d: Dataset) -> MissingnessSummary:
    mask = d.missing_mask
    per_attribute = mask.mean(axis=0) if d.n_instances else np.zeros(d.n_attributes)
    return MissingnessSummary(
        attribute_fractions={attribute.name: float(per_attribute[attribute.index]) for attribute in d.schema},
        overall=float(mask.mean()) if mask.size else 0.0,
        affected_attributes=int(mask.any(axis=0).sum()),
        affected_instances=int(mask.any(axis=1).sum()),
    )


def _imputed_columns(d: Dataset, include_class: bool) -> List[int]:
    return [a.index for a in d.schema if include_class or a.index != d.class_index]


def mean_mode_impute(d: Dataset, reference: Optional[Dataset] = None, include_class: bool = False) -> Dataset:
    """
    Fill numeric cells with the mean and nominal cells with the mode (lowest category on ties) of the
    reference dataset, which is the dataset itself unless given. Pass a training partition as reference to
    fill a test partition with training statistics. The class is only filled when include_class is set.
    """
    reference = reference or d
    values = d.values.copy()

    for index in _imputed_columns(d, include_class):
        missing = np.isnan(values[:, index])
        if not missing.any():
            continue

        column = reference.values[:, index]
        observed = column[~np.isnan(column)]
        attribute = d.schema[index]
        if not observed.size:
            raise ImputationError(f"Attribute {attribute.name} has no observed values to compute a "
                                  f"{'mode' if attribute.is_nominal else 'mean'} from.")

        if attribute.is_nominal:
            fill = float(np.argmax(np.bincount(observed.astype(int), minlength=len(attribute.categories))))
        else:
            fill = float(observed.mean())
        values[missing, index] = fill

    return d.replace(values=values)


# --- the normal model ---


def _cholesky(matrix: np.ndarray, what: str) -> np.ndarray:
    """
    Lower Cholesky factor. A matrix that is not numerically positive definite gets a ridge of
    1e-8 * trace / p on its diagonal, which grows tenfold until the factorization works.
    """
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        pass

    size = matrix.shape[0]
    ridge = RIDGE_FACTOR * max(float(np.trace(matrix)) / size, 1.0)
    for _ in range(12):
        try:
            factor = linalg.cholesky(matrix + ridge * np.eye(size), lower=True)
            log.warning(f"The {what} is numerically singular, added a ridge of {ridge:.3g}.")
            return factor
        except linalg.LinAlgError:
            ridge *= 10
    raise ImputationError(f"The {what} could not be repaired into a positive definite matrix.")


def _patterns(x: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Rows grouped by missingness pattern: (rows, observed columns, missing columns), in a fixed order."""
    mask = np.isnan(x)
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    return [(np.flatnonzero(inverse == i), np.flatnonzero(~pattern), np.flatnonzero(pattern))
            for i, pattern in enumerate(patterns)]


def _conditional(state: NormalModelState, rows: np.ndarray, observed: np.ndarray, missing: np.ndarray):
    """Mean (per row) and covariance of the missing coordinates given the observed ones."""
    if not observed.size:
        means = np.tile(state.mean[missing], (rows.shape[0], 1))
        return means, state.covariance[np.ix_(missing, missing)]

    factor = _cholesky(state.covariance[np.ix_(observed, observed)], 'observed covariance block')
    coefficients = linalg.cho_solve((factor, True), state.covariance[np.ix_(observed, missing)])
    means = state.mean[missing] + (rows - state.mean[observed]) @ coefficients
    covariance = state.covariance[np.ix_(missing, missing)] - state.covariance[np.ix_(missing, observed)] @ coefficients
    return means, (covariance + covariance.T) / 2


def _check_matrix(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    empty = np.isnan(x).all(axis=0)
    if empty.any():
        raise ImputationError(f"Columns {np.flatnonzero(empty).tolist()} have no observed values.")
    return x


def observed_loglikelihood(x: np.ndarray, state: NormalModelState) -> float:
    """Log-likelihood of the observed cells only, the quantity EM never decreases."""
    x = _check_matrix(x)
    total = 0.0
    for rows, observed, _ in _patterns(x):
        if not observed.size:
            continue
        values = x[np.ix_(rows, observed)] - state.mean[observed]
        factor = _cholesky(state.covariance[np.ix_(observed, observed)], 'observed covariance block')
        solved = linalg.solve_triangular(factor, values.T, lower=True)
        log_determinant = 2 * np.sum(np.log(np.diag(factor)))
        total -= 0.5 * (rows.size * (observed.size * np.log(2 * np.pi) + log_determinant) + np.sum(solved ** 2))
    return float(total)


def _initial_state(x: np.ndarray) -> NormalModelState:
    """
    Mean and covariance (divided by N) of the complete rows. With too few complete rows, or a constant
    column among them, the start is the per column mean and variance of the observed cells.
    """
    p = x.shape[1]
    complete = x[~np.isnan(x).any(axis=1)]
    if complete.shape[0] > p:
        covariance = np.atleast_2d(np.cov(complete, rowvar=False, bias=True))
        if (np.diag(covariance) > 0).all():
            return NormalModelState(mean=complete.mean(axis=0), covariance=(covariance + covariance.T) / 2)

    mean = np.nanmean(x, axis=0)
    variance = np.nanvar(x, axis=0)
    return NormalModelState(mean=mean, covariance=np.diag(np.where(variance > 0, variance, 1.0)))


def em_mle(x: np.ndarray, tol: float = 1e-6, max_iter: int = 1000,
           history: Optional[List[float]] = None) -> NormalModelState:
    """
    Maximum likelihood mean and covariance (divided by N) of a multivariate normal from data with missing
    entries (NaN). Stops when no mean or covariance entry moved more than tol.

    :param history: when given, the observed log-likelihood of every visited state is appended to it.
    :raises EmConvergenceError: after max_iter iterations, carrying the last state.
    """
    x = _check_matrix(x)
    n, p = x.shape
    patterns = _patterns(x)
    state = _initial_state(x)

    for iteration in range(1, max_iter + 1):
        if history is not None:
            history.append(observed_loglikelihood(x, state))

        totals = np.zeros(p)
        products = np.zeros((p, p))
        for rows, observed, missing in patterns:
            filled = x[rows].copy()
            if missing.size:
                means, covariance = _conditional(state, filled[:, observed], observed, missing)
                filled[:, missing] = means
                products[np.ix_(missing, missing)] += rows.size * covariance
            totals += filled.sum(axis=0)
            products += filled.T @ filled

        mean = totals / n
        covariance = products / n - np.outer(mean, mean)
        updated = NormalModelState(mean=mean, covariance=(covariance + covariance.T) / 2, iterations=iteration)

        change = max(np.max(np.abs(updated.mean - state.mean)), np.max(np.abs(updated.covariance - state.covariance)))
        state = updated
        if change < tol:
            if history is not None:
                history.append(observed_loglikelihood(x, state))
            log.debug(f"EM converged after {iteration} iterations.")
            return state

    raise EmConvergenceError(f"EM did not converge within {max_iter} iterations.", state=state, iterations=max_iter)


def da_step(state: NormalModelState, x: np.ndarray,
            rng: np.random.Generator) -> Tuple[NormalModelState, np.ndarray]:
    """
    One data augmentation step. I-step: every missing cell is drawn from the conditional normal given the
    observed cells of its row. P-step: the covariance is drawn from inverse-Wishart(N - 1, scatter matrix)
    and the mean from Normal(completed mean, covariance / N).
    """
    x = _check_matrix(x)
    n, p = x.shape
    if n - 1 < p:
        raise ImputationError(f"The posterior draw needs more instances than variables, got {n} for {p}.")

    completed = x.copy()
    for rows, observed, missing in _patterns(x):
        if not missing.size:
            continue
        means, covariance = _conditional(state, x[np.ix_(rows, observed)], observed, missing)
        factor = _cholesky(covariance, 'conditional covariance')
        completed[np.ix_(rows, missing)] = means + rng.standard_normal(means.shape) @ factor.T

    centre = completed.mean(axis=0)
    scatter = (completed - centre).T @ (completed - centre)
    # the factorization repairs a singular scatter matrix before the draw
    factor = _cholesky(scatter, 'scatter matrix')
    covariance = np.atleast_2d(invwishart.rvs(df=n - 1, scale=factor @ factor.T, random_state=rng))
    covariance = (covariance + covariance.T) / 2
    mean = centre + _cholesky(covariance / n, 'posterior covariance') @ rng.standard_normal(p)

    return NormalModelState(mean=mean, covariance=covariance), completed


# --- datasets ---


def _decode(d: Dataset, columns: List[int], completed: np.ndarray) -> Dataset:
    """Writes drawn values into the originally missing cells only; nominal draws go to the nearest category."""
    values = d.values.copy()
    for position, index in enumerate(columns):
        missing = np.isnan(values[:, index])
        if not missing.any():
            continue
        drawn = completed[missing, position]
        attribute = d.schema[index]
        if attribute.is_nominal:
            drawn = np.clip(np.rint(drawn), 0, len(attribute.categories) - 1)
        values[missing, index] = drawn
    return d.replace(values=values)


def run_multiple_imputation(d: Dataset, cfg: ImputationConfig) -> MultipleImputation:
    """
    The chain works on standardized columns, which leaves the normal model unchanged but makes the EM
    tolerance comparable across attributes of any scale.
    """
    if not cfg.include_class and np.isnan(d.values[:, d.class_index]).any():
        log.info("Instances without a class are dropped before imputation, the class is not imputed.")
        d = drop_missing_class(d)

    columns = _imputed_columns(d, cfg.include_class)
    x = d.values[:, columns]
    if not np.isnan(x).any():
        return MultipleImputation(datasets=[d.replace() for _ in range(cfg.m)], em_iterations=0, columns=columns)

    x = _check_matrix(x)
    centre = np.nanmean(x, axis=0)
    scale = np.nanstd(x, axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    standardized = (x - centre) / scale

    rng = np.random.default_rng(cfg.seed)
    state = em_mle(standardized, tol=cfg.em_tol, max_iter=cfg.em_max_iter)
    em_iterations = state.iterations
    log.debug(f"Multiple imputation: EM took {em_iterations} iterations, burn-in of {cfg.burn_in} steps.")

    for _ in range(cfg.burn_in):
        state, _ = da_step(state, standardized, rng)

    datasets = []
    for _ in range(cfg.m):
        for _ in range(cfg.thin):
            state, completed = da_step(state, standardized, rng)
        datasets.append(_decode(d, columns, completed * scale + centre))

    return MultipleImputation(datasets=datasets, em_iterations=em_iterations, columns=columns)


def multiple_impute(d: Dataset, cfg: ImputationConfig) -> List[Dataset]:
    return run_multiple_imputation(d, cfg).datasets


def impute_summary(original: Dataset, imputed: List[Dataset]) -> Dict[str, Dict[str, float]]:
    """Per attribute with missing cells: how many cells were imputed and the mean and sd of what was drawn."""
    summary = {}
    if not imputed:
        return summary

    # Imputation may have dropped instances without a class, compare with the same rows.
    if imputed[0].n_instances != original.n_instances:
        original = drop_missing_class(original)

    for attribute in original.schema:
        missing = np.isnan(original.values[:, attribute.index])
        if not missing.any():
            continue
        drawn = np.concatenate([d.values[missing, attribute.index] for d in imputed])
        drawn = drawn[~np.isnan(drawn)]
        summary[attribute.name] = {
            'imputed_cells': int(missing.sum()),
            'mean': float(drawn.mean()) if drawn.size else float('nan'),
            'sd': float(drawn.std()) if drawn.size else float('nan'),
        }
    return summary


def with_seed(cfg: ImputationConfig, master_seed: int) -> ImputationConfig:
    """The chain seed used for one master seed of an experiment."""
    return replace(cfg, seed=int(np.random.SeedSequence([cfg.seed, master_seed]).generate_state(1)[0]))
