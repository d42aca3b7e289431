"""
Instance based k-nearest-neighbour classification (IBK).

The training set is stored as is, a query is classified by a weighted vote among its k nearest training
instances. Distances are Euclidean over the predictive attributes, with these per attribute differences:

- numeric, both present: |a - b|
- nominal, both present: 0 when equal, 1 otherwise
- both missing: 1
- one missing: 1 for nominal, max(v, 1 - v) for numeric where v is the present value

Numeric attributes are expected to be normalized to [0, 1] before classification.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from classbench.benchmark.logic import ClassbenchError, ConfigurationError, DatasetError
from classbench.benchmark.logic.data import AttributeSchema, Dataset

log = logging.getLogger(__package__)

UNIFORM = 'uniform'
INVERSE_DISTANCE = 'inverse_distance'
COMPLEMENT_DISTANCE = 'complement_distance'
WEIGHTINGS = [UNIFORM, INVERSE_DISTANCE, COMPLEMENT_DISTANCE]

# How the classifiers are labelled in reports.
WEIGHTING_LABELS = {UNIFORM: 'IBK', INVERSE_DISTANCE: 'IBK(1/d)', COMPLEMENT_DISTANCE: 'IBK(1-d)'}


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    weighting: str = UNIFORM

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"Unknown weighting {self.weighting}, use one of {', '.join(WEIGHTINGS)}.")
        if int(self.k) != self.k or self.k < 1 or self.k % 2 == 0:
            raise ConfigurationError(f"k must be a positive odd number, got {self.k}.")

    @property
    def label(self) -> str:
        return WEIGHTING_LABELS[self.weighting]

    def parameters(self) -> str:
        return f"k={self.k} weighting={self.weighting}"


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    """Per class vote weights. Prediction is the class with most weight, the lowest index wins ties."""
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size < 2:
            raise ClassbenchError("A class distribution needs a weight per class, at least 2 classes.")
        if (weights < 0).any() or not (weights > 0).any():
            raise ClassbenchError(f"Class weights must be non-negative with at least one positive: {weights}.")
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)

    @property
    def predicted(self) -> int:
        # argmax returns the first maximum
        return int(np.argmax(self.weights))

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def _nominal_mask(schema: Sequence[AttributeSchema]) -> np.ndarray:
    return np.array([attribute.is_nominal for attribute in schema], dtype=bool)


def pairwise_distances(queries: np.ndarray, train: np.ndarray, nominal: np.ndarray) -> np.ndarray:
    """
    Distances between every query (rows of `queries`) and every training instance, as a Q x N matrix.
    Both matrices hold predictive attributes only, NaN marks missing.
    """
    queries = np.atleast_2d(queries)
    total = np.zeros((queries.shape[0], train.shape[0]))

    # Attribute by attribute keeps memory at Q x N, also for wide datasets.
    for j in range(train.shape[1]):
        q = queries[:, j][:, np.newaxis]
        t = train[:, j][np.newaxis, :]

        if nominal[j]:
            # NaN never compares equal, so any missing side gives a difference of 1.
            delta = (q != t).astype(float)
        else:
            delta = np.abs(q - t)
            q_missing, t_missing = np.isnan(q), np.isnan(t)
            if q_missing.any() or t_missing.any():
                far_from_train = np.maximum(t, 1 - t)
                far_from_query = np.maximum(q, 1 - q)
                delta = np.where(q_missing, np.where(t_missing, 1.0, far_from_train),
                                 np.where(t_missing, far_from_query, delta))
        total += delta * delta

    return np.sqrt(total)


def distance(a: np.ndarray, b: np.ndarray, schema: Sequence[AttributeSchema]) -> float:
    """Distance between two instances given as predictive attribute values, aligned with the schema."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != (len(schema),) or b.shape != (len(schema),):
        raise DatasetError(f"Instances must have {len(schema)} values, got {a.shape} and {b.shape}.")
    return float(pairwise_distances(a[np.newaxis, :], b[np.newaxis, :], _nominal_mask(schema))[0, 0])


def vote(distances: np.ndarray, labels: np.ndarray, n_classes: int, cfg: KnnConfig) -> np.ndarray:
    """
    Class weights per query from a Q x N distance matrix. Ties on distance are broken by the lower training
    index, which a stable sort gives for free.
    """
    neighbours = np.argsort(distances, axis=1, kind='stable')[:, :cfg.k]
    near = np.take_along_axis(distances, neighbours, axis=1)

    if cfg.weighting == INVERSE_DISTANCE:
        zero = near == 0
        # Neighbours at distance 0 share all weight equally, the limit of 1/d.
        weights = np.where(zero.any(axis=1, keepdims=True), zero.astype(float), 1 / np.where(zero, 1, near))
    elif cfg.weighting == COMPLEMENT_DISTANCE:
        weights = np.maximum(0.0, 1 - near)
        # Every neighbour at distance 1 or more: fall back to equal votes.
        nothing = ~(weights > 0).any(axis=1)
        weights[nothing] = 1.0
    else:
        weights = np.ones_like(near)

    result = np.zeros((distances.shape[0], n_classes))
    rows = np.repeat(np.arange(distances.shape[0]), cfg.k)
    np.add.at(result, (rows, labels[neighbours].ravel()), weights.ravel())
    return result


def classify_many(train: Dataset, queries: np.ndarray, cfg: KnnConfig, chunk: Optional[int] = None) -> np.ndarray:
    """
    Class weights (Q x C) for query instances given as full rows of the training schema. The class cell of a
    query is ignored. Queries are handled in blocks to bound memory.
    """
    if train.n_instances == 0:
        raise DatasetError("Can not classify with an empty training set.")
    if cfg.k > train.n_instances:
        raise ConfigurationError(f"k={cfg.k} is larger than the training set of {train.n_instances} instances, "
                                 f"use a smaller k.")

    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != train.n_attributes:
        raise DatasetError(f"Queries must have {train.n_attributes} values, got {queries.shape[1]}.")

    chunk = chunk or settings.CLASSBENCH_KNN_QUERY_CHUNK
    nominal = _nominal_mask(train.predictive_schema())
    stored = train.predictors()
    labels = train.labels()
    queries = queries[:, train.predictive_indices]

    blocks = []
    for start in range(0, queries.shape[0], chunk):
        distances = pairwise_distances(queries[start:start + chunk], stored, nominal)
        blocks.append(vote(distances, labels, train.n_classes, cfg))

    return np.vstack(blocks) if blocks else np.zeros((0, train.n_classes))


def classify(train: Dataset, query: np.ndarray, cfg: KnnConfig) -> ClassDistribution:
    return ClassDistribution(weights=classify_many(train, np.asarray(query, dtype=float)[np.newaxis, :], cfg)[0])


def predict_proba(train: Dataset, test: Dataset, cfg: KnnConfig) -> np.ndarray:
    """Class probabilities for every instance of a test partition: the vote weights divided by their sum."""
    weights = classify_many(train, test.values, cfg)
    return weights / weights.sum(axis=1, keepdims=True)
