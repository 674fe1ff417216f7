"""
Train/test splitting and classification metrics.

Precision, recall and F1 follow the zero-denominator convention: a ratio
with nothing to divide by is 0, never NaN.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass
from operator import attrgetter
from typing import NamedTuple, TypeVar

import numpy as np
import pandas as pd

from oer_quality.classifier import CLASS_LABELS, FeatureVector, ForestModel, predict_many
from oer_quality.metadata import EvaluationError, QualityFlag

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Partition(NamedTuple):
    train: list
    test: list


def stratified_split(
    items: Sequence[T],
    train_fraction: float,
    seed: int,
    label: Callable[[T], Hashable] = attrgetter("quality_flag"),
) -> Partition:
    """Splits each class separately so both halves keep the class proportions.

    Each class is shuffled with a generator seeded by `seed` and its first
    ``round(train_fraction * size)`` members go to training. Both halves keep
    the input order.

    Raises:
        EvaluationError: If the fraction is outside (0, 1) or only one class
            is present.
    """
    if not 0.0 < train_fraction < 1.0:
        raise EvaluationError(f"train fraction must lie in (0, 1), got {train_fraction}")

    groups: dict[Hashable, list[int]] = {}
    for index, item in enumerate(items):
        groups.setdefault(label(item), []).append(index)
    if len(groups) < 2:
        raise EvaluationError("a stratified split needs at least two classes")

    rng = np.random.default_rng(seed)
    train_indices: list[int] = []
    for members in groups.values():
        shuffled = rng.permutation(len(members))
        cut = int(round(train_fraction * len(members)))
        train_indices.extend(members[i] for i in shuffled[:cut])

    in_train = set(train_indices)
    train = [items[i] for i in sorted(in_train)]
    test = [item for i, item in enumerate(items) if i not in in_train]
    logger.info("split %d items into %d train / %d test", len(items), len(train), len(test))
    return Partition(train, test)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class EvalReport:
    """Confusion matrix (rows: true class, columns: predicted) and derived metrics."""

    confusion: tuple[tuple[int, int], tuple[int, int]]
    accuracy: float
    per_class: dict[QualityFlag, ClassMetrics]
    test_count: int
    class_labels: tuple[QualityFlag, QualityFlag] = CLASS_LABELS

    @classmethod
    def from_confusion(
        cls, confusion, class_labels: tuple[QualityFlag, QualityFlag] = CLASS_LABELS
    ) -> "EvalReport":
        matrix = np.asarray(confusion, dtype=np.int64)
        total = int(matrix.sum())
        if total == 0:
            raise EvaluationError("empty test set")
        per_class = {}
        for i, label in enumerate(class_labels):
            true_positive = int(matrix[i, i])
            precision = _ratio(true_positive, int(matrix[:, i].sum()))
            recall = _ratio(true_positive, int(matrix[i, :].sum()))
            f1 = (
                2 * precision * recall / (precision + recall)
                if precision + recall
                else 0.0
            )
            per_class[label] = ClassMetrics(precision, recall, f1)
        return cls(
            confusion=tuple(tuple(int(v) for v in row) for row in matrix),
            accuracy=int(np.trace(matrix)) / total,
            per_class=per_class,
            test_count=total,
            class_labels=tuple(class_labels),
        )

    def to_dict(self) -> dict:
        return {
            "class_labels": [label.value for label in self.class_labels],
            "confusion": [list(row) for row in self.confusion],
            "accuracy": self.accuracy,
            "per_class": {
                label.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                }
                for label, m in self.per_class.items()
            },
            "test_count": self.test_count,
        }

    def to_table(self) -> str:
        frame = pd.DataFrame(
            [
                {
                    "class": label.value,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": sum(self.confusion[i]),
                }
                for i, (label, m) in enumerate(self.per_class.items())
            ]
        )
        return (
            frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
            + f"\n\naccuracy  {self.accuracy:.4f}  ({self.test_count} test records)"
        )


def confusion_matrix(
    true_labels: Sequence[QualityFlag],
    predicted_labels: Sequence[QualityFlag],
    class_labels: tuple[QualityFlag, QualityFlag] = CLASS_LABELS,
) -> np.ndarray:
    matrix = np.zeros((2, 2), dtype=np.int64)
    for truth, predicted in zip(true_labels, predicted_labels, strict=True):
        if truth not in class_labels:
            raise EvaluationError(f"label {truth.value!r} cannot be evaluated")
        matrix[class_labels.index(truth), class_labels.index(predicted)] += 1
    return matrix


def evaluate(
    model: ForestModel,
    test_features: Sequence[FeatureVector],
    test_labels: Sequence[QualityFlag],
) -> EvalReport:
    """Scores the model's predictions on a labelled test set.

    Raises:
        EvaluationError: If the test set is empty, the lists differ in length,
            or a label is not one of the model's classes.
    """
    if len(test_features) != len(test_labels):
        raise EvaluationError(
            f"{len(test_features)} feature vectors but {len(test_labels)} labels"
        )
    if not test_features:
        raise EvaluationError("empty test set")
    predictions = predict_many(model, test_features)
    matrix = confusion_matrix(
        test_labels, [p.label for p in predictions], tuple(model.class_labels)
    )
    report = EvalReport.from_confusion(matrix, tuple(model.class_labels))
    logger.info("accuracy %.4f on %d records", report.accuracy, report.test_count)
    return report
