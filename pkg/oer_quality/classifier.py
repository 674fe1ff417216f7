"""
Predicts whether an OER would pass quality control from its metadata.

Each record is reduced to six features (both scores, level availability and
the three field lengths) and classified by a Random Forest. Models are saved
as versioned JSON documents that also carry the benchmark the features were
extracted with, so a saved model is self-contained.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from oer_quality.benchmark import Benchmark
from oer_quality.metadata import (
    ModelFormatError,
    OerRecord,
    QualityFlag,
    ScoredField,
    TrainingError,
    field_length,
    field_present,
)
from oer_quality.random_forest import (
    ForestHyperparams,
    Node,
    TreeFit,
    fit_forest,
    has_split,
    node_from_dict,
    node_to_dict,
    tree_vote,
)
from oer_quality.scoring import availability_score, boolean_rating, normal_score

logger = logging.getLogger(__name__)

MODEL_VERSION = 1
CLASS_LABELS = (QualityFlag.WITH_CONTROL, QualityFlag.WITHOUT_CONTROL)


@dataclass(frozen=True)
class FeatureVector:
    """The six classifier inputs, in their fixed order."""

    availability_score: float
    normal_score: float
    level_available: int
    description_length: int
    title_length: int
    subjects_length: int

    def as_tuple(self) -> tuple:
        return astuple(self)


FEATURE_ORDER: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


def extract_features(record: OerRecord, benchmark: Benchmark) -> FeatureVector:
    return FeatureVector(
        availability_score=availability_score(record, benchmark),
        normal_score=normal_score(record, benchmark),
        level_available=int(boolean_rating(field_present(record, ScoredField.LEVEL))),
        description_length=field_length(record, ScoredField.DESCRIPTION),
        title_length=field_length(record, ScoredField.TITLE),
        subjects_length=field_length(record, ScoredField.SUBJECTS),
    )


def _class_index(label: QualityFlag) -> int:
    try:
        return CLASS_LABELS.index(label)
    except ValueError:
        raise TrainingError(f"label {label.value!r} cannot be used for training") from None


def _as_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([fv.as_tuple() for fv in features], dtype=float).reshape(
        len(features), len(FEATURE_ORDER)
    )


@dataclass(frozen=True)
class ForestModel:
    """A trained forest plus everything needed to apply and reproduce it."""

    trees: tuple[Node, ...]
    hyperparams: ForestHyperparams
    feature_importance: Mapping[str, float]
    class_labels: tuple[QualityFlag, QualityFlag] = CLASS_LABELS
    feature_order: tuple[str, ...] = FEATURE_ORDER
    benchmark: Benchmark | None = None
    training: Mapping = field(default_factory=dict)
    """Training summary: row counts, accuracy, out-of-bag accuracy."""
    config: Mapping = field(default_factory=dict)
    """The effective run configuration that produced the model."""

    @property
    def has_splits(self) -> bool:
        return any(has_split(tree) for tree in self.trees)

    def with_metadata(
        self, *, benchmark: Benchmark | None = None, config: Mapping | None = None
    ) -> "ForestModel":
        return ForestModel(
            trees=self.trees,
            hyperparams=self.hyperparams,
            feature_importance=self.feature_importance,
            class_labels=self.class_labels,
            feature_order=self.feature_order,
            benchmark=benchmark if benchmark is not None else self.benchmark,
            training=self.training,
            config=config if config is not None else self.config,
        )

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "hyperparams": self.hyperparams.to_dict(),
            "class_labels": [label.value for label in self.class_labels],
            "feature_order": list(self.feature_order),
            "feature_importance": {
                name: self.feature_importance[name] for name in self.feature_order
            },
            "benchmark": self.benchmark.to_dict() if self.benchmark is not None else None,
            "training": dict(self.training),
            "config": dict(self.config),
            "trees": [node_to_dict(tree) for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, document: Mapping) -> "ForestModel":
        if document.get("version") != MODEL_VERSION:
            raise ModelFormatError(
                f"unsupported model version {document.get('version')!r}"
            )
        try:
            feature_order = tuple(document["feature_order"])
            if feature_order != FEATURE_ORDER:
                raise ModelFormatError(f"unexpected feature order {list(feature_order)}")
            benchmark_doc = document.get("benchmark")
            return cls(
                trees=tuple(node_from_dict(tree) for tree in document["trees"]),
                hyperparams=ForestHyperparams.from_dict(document["hyperparams"]),
                feature_importance={
                    name: float(value)
                    for name, value in document["feature_importance"].items()
                },
                class_labels=tuple(QualityFlag(v) for v in document["class_labels"]),
                feature_order=feature_order,
                benchmark=Benchmark.from_dict(benchmark_doc) if benchmark_doc else None,
                training=document.get("training") or {},
                config=document.get("config") or {},
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed model document: {e}") from e

    def dumps(self) -> str:
        """The model document as indented JSON.

        Raises:
            ModelFormatError: If a tree is nested too deeply for the JSON encoder.
        """
        try:
            return json.dumps(self.to_dict(), indent=2) + "\n"
        except RecursionError as e:
            raise ModelFormatError(
                "a tree is too deep to serialize; train with a max_depth limit"
            ) from e

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: "str | Path") -> "ForestModel":
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{path} is not a JSON document: {e.msg}") from e
        except RecursionError as e:
            raise ModelFormatError(f"{path} nests trees too deeply to load") from e
        return cls.from_dict(document)


class Prediction(NamedTuple):
    label: QualityFlag
    vote_fraction: float


def _predict_row(model: ForestModel, row) -> Prediction:
    votes = [tree_vote(tree, row) for tree in model.trees]
    positive = votes.count(0)
    negative = len(votes) - positive
    # Exact ties fail closed: no quality claim without a majority.
    if positive > negative:
        return Prediction(model.class_labels[0], positive / len(votes))
    return Prediction(model.class_labels[1], negative / len(votes))


def predict(model: ForestModel, features: FeatureVector) -> Prediction:
    return _predict_row(model, features.as_tuple())


def predict_many(model: ForestModel, features: Sequence[FeatureVector]) -> list[Prediction]:
    return [predict(model, fv) for fv in features]


def _oob_accuracy(fits: Sequence[TreeFit], X: np.ndarray, y: np.ndarray) -> float | None:
    votes = np.zeros((len(y), 2), dtype=np.int64)
    for fit in fits:
        in_bag = np.zeros(len(y), dtype=bool)
        in_bag[fit.sample] = True
        for i in np.flatnonzero(~in_bag):
            votes[i, tree_vote(fit.root, X[i])] += 1
    voted = votes.sum(axis=1) > 0
    if not voted.any():
        return None
    predicted = np.where(votes[:, 0] > votes[:, 1], 0, 1)
    return float((predicted[voted] == y[voted]).mean())


def train_forest(
    features: Sequence[FeatureVector],
    labels: Sequence[QualityFlag],
    params: ForestHyperparams,
    n_jobs: int = 1,
) -> ForestModel:
    """Trains a forest that separates controlled from uncontrolled records.

    Raises:
        TrainingError: If the inputs differ in length, hold an unknown label,
            or contain a single class.
    """
    if len(features) != len(labels):
        raise TrainingError(
            f"{len(features)} feature vectors but {len(labels)} labels"
        )
    y = np.array([_class_index(label) for label in labels], dtype=np.int64)
    X = _as_matrix(features)
    fits = fit_forest(X, y, params, n_jobs=n_jobs)

    raw_importance = np.sum([fit.importance for fit in fits], axis=0)
    total = float(raw_importance.sum())
    if total > 0:
        normalized = raw_importance / total
    else:
        normalized = np.zeros(len(FEATURE_ORDER))
    model = ForestModel(
        trees=tuple(fit.root for fit in fits),
        hyperparams=params,
        feature_importance={
            name: float(value) for name, value in zip(FEATURE_ORDER, normalized)
        },
    )

    train_predictions = [_predict_row(model, row) for row in X]
    train_accuracy = float(
        np.mean([p.label is CLASS_LABELS[i] for p, i in zip(train_predictions, y)])
    )
    training = {
        "rows": int(len(y)),
        "class_counts": {
            label.value: int(np.sum(y == i)) for i, label in enumerate(CLASS_LABELS)
        },
        "train_accuracy": train_accuracy,
        "oob_accuracy": _oob_accuracy(fits, X, y) if params.bootstrap else None,
    }
    logger.info(
        "trained %d trees; train accuracy %.4f", params.tree_count, train_accuracy
    )
    return ForestModel(
        trees=model.trees,
        hyperparams=params,
        feature_importance=model.feature_importance,
        training=training,
    )


@dataclass(frozen=True)
class ImportanceRanking:
    """Features ordered by importance, most important first."""

    entries: list[tuple[str, float]]
    uniform_fallback: bool = False
    """True when the forest has no splits and importances were set uniform."""


def feature_importance(model: ForestModel) -> ImportanceRanking:
    if not model.has_splits:
        logger.warning("forest has no splits; reporting uniform feature importance")
        share = 1.0 / len(model.feature_order)
        return ImportanceRanking([(name, share) for name in model.feature_order], True)
    entries = sorted(
        ((name, model.feature_importance[name]) for name in model.feature_order),
        key=lambda item: item[1],
        reverse=True,
    )
    return ImportanceRanking(entries)
