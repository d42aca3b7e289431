"""
Evaluation metrics over a confusion matrix (rows are the actual class, columns the predicted class) and
over predicted class probabilities.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, roc_curve

from classbench.benchmark.logic import MetricError

log = logging.getLogger(__package__)

PROBABILITY_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise MetricError(f"A confusion matrix is square, got shape {counts.shape}.")
        if (counts < 0).any():
            raise MetricError("A confusion matrix can not hold negative counts.")
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_predictions(cls, actual: Sequence[int], predicted: Sequence[int], n_classes: int) -> 'ConfusionMatrix':
        if len(actual) != len(predicted):
            raise MetricError(f"Got {len(actual)} actual classes and {len(predicted)} predictions.")
        if not len(actual):
            return cls(counts=np.zeros((n_classes, n_classes), dtype=np.int64))
        return cls(counts=confusion_matrix(actual, predicted, labels=list(range(n_classes))))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        return ConfusionMatrix(counts=self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def _require_counts(cm: ConfusionMatrix):
    if cm.total == 0:
        raise MetricError("The confusion matrix is empty, nothing was evaluated.")


def accuracy(cm: ConfusionMatrix) -> float:
    _require_counts(cm)
    return float(np.trace(cm.counts) / cm.total)


def kappa(cm: ConfusionMatrix) -> float:
    """
    Chance corrected agreement. When chance agreement is already 1 (all instances in one class, always
    predicted as such) kappa is 1 for a perfect predictor and 0 otherwise.
    """
    _require_counts(cm)
    observed = accuracy(cm)
    total = float(cm.total)
    expected = float(np.sum(cm.counts.sum(axis=1) * cm.counts.sum(axis=0)) / (total * total))
    if expected >= 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1 - expected)


def rmse(probabilities: np.ndarray, actual: Sequence[int]) -> float:
    """Root mean squared difference between the class probabilities and the one-hot truth, over N x C terms."""
    probabilities = np.atleast_2d(np.asarray(probabilities, dtype=float))
    actual = np.asarray(actual, dtype=int)

    if probabilities.shape[0] != actual.shape[0]:
        raise MetricError(f"Got {probabilities.shape[0]} predictions and {actual.shape[0]} actual classes.")
    if not actual.size:
        raise MetricError("Can not compute RMSE over zero instances.")
    if not np.allclose(probabilities.sum(axis=1), 1.0, atol=PROBABILITY_TOLERANCE):
        raise MetricError("Every probability vector must sum to 1.")
    if actual.min() < 0 or actual.max() >= probabilities.shape[1]:
        raise MetricError(f"Actual classes must be in 0..{probabilities.shape[1] - 1}.")

    truth = np.eye(probabilities.shape[1])[actual]
    return float(np.sqrt(np.mean((probabilities - truth) ** 2)))


def tp_fp_rates(cm: ConfusionMatrix, positive: int) -> Tuple[float, float]:
    if not 0 <= positive < cm.n_classes:
        raise MetricError(f"Class {positive} does not exist, there are {cm.n_classes} classes.")

    tp = int(cm.counts[positive, positive])
    fn = int(cm.counts[positive].sum()) - tp
    fp = int(cm.counts[:, positive].sum()) - tp
    tn = cm.total - tp - fn - fp

    if tp + fn == 0:
        raise MetricError(f"TP rate undefined: class {positive} has no actual instances (TP + FN = 0).")
    if fp + tn == 0:
        raise MetricError(f"FP rate undefined: every instance belongs to class {positive} (FP + TN = 0).")
    return tp / (tp + fn), fp / (fp + tn)


def roc_points(scores: Sequence[float], labels: Sequence[bool]) -> List[Tuple[float, float]]:
    """
    (FP rate, TP rate) for every distinct score used as threshold, from the highest score down, starting at
    (0, 0) and ending at (1, 1). Instances with the same score are passed in a single step.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise MetricError(f"Got {scores.size} scores and {labels.size} labels.")
    if labels.all() or not labels.any():
        raise MetricError("A ROC curve needs at least one positive and one negative instance.")

    fp_rate, tp_rate, _ = roc_curve(labels, scores, drop_intermediate=False)
    return [(float(fp), float(tp)) for fp, tp in zip(fp_rate, tp_rate)]


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    accuracy: float
    rmse: float
    kappa: float
    tp_rate: List[float] = field(default_factory=list)
    fp_rate: List[float] = field(default_factory=list)
    roc: List[Tuple[float, float]] = field(default_factory=list)
    wall_time: float = 0.0
    positive: int = 0


def _rates_or_nan(cm: ConfusionMatrix, positive: int) -> Tuple[float, float]:
    try:
        return tp_fp_rates(cm, positive)
    except MetricError:
        return float('nan'), float('nan')


def evaluate(probabilities: np.ndarray, actual: Sequence[int], positive: int = 0,
             wall_time: float = 0.0) -> EvaluationReport:
    """
    Everything we report about one set of predictions. The prediction is the most probable class, the lowest
    index on ties. Per class rates that are undefined are NaN; the ROC curve is left out when the positive
    class is absent or is the only class present.
    """
    probabilities = np.atleast_2d(np.asarray(probabilities, dtype=float))
    actual = np.asarray(actual, dtype=int)
    n_classes = probabilities.shape[1]

    cm = ConfusionMatrix.from_predictions(actual, np.argmax(probabilities, axis=1), n_classes)
    rates = [_rates_or_nan(cm, c) for c in range(n_classes)]

    is_positive = actual == positive
    roc = roc_points(probabilities[:, positive], is_positive) if 0 < is_positive.sum() < actual.size else []

    return EvaluationReport(
        confusion=cm,
        accuracy=accuracy(cm),
        rmse=rmse(probabilities, actual),
        kappa=kappa(cm),
        tp_rate=[tp for tp, _ in rates],
        fp_rate=[fp for _, fp in rates],
        roc=roc,
        wall_time=wall_time,
        positive=positive,
    )
