"""
A small binary Random Forest built on numpy.

Trees are grown on bootstrap samples with Gini impurity as the split
criterion. Each tree draws from its own generator seeded with
``seed ^ tree_index``, so the forest is identical whether trees are grown
one after another or on a thread pool.

Class 0 is the positive class and class 1 the negative one. Every tie (leaf
counts or forest votes) resolves to class 1.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from oer_quality.metadata import ModelFormatError, TrainingError

logger = logging.getLogger(__name__)

CLASS_COUNT = 2
TIE_CLASS = 1


@dataclass(frozen=True)
class ForestHyperparams:
    """Training settings. None of them are fixed by the data; all have defaults."""

    tree_count: int = 100
    max_depth: int | None = None
    """None grows trees until leaves are pure or too small to split."""
    min_samples_leaf: int = 1
    features_per_split: int = 2
    seed: int = 0
    bootstrap: bool = True
    """Draw each tree's sample with replacement; off trains every tree on all rows."""

    def __post_init__(self):
        if self.tree_count < 1:
            raise TrainingError("tree_count must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise TrainingError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise TrainingError("min_samples_leaf must be at least 1")
        if self.features_per_split < 1:
            raise TrainingError("features_per_split must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise TrainingError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, document: Mapping) -> "ForestHyperparams":
        return cls(**{k: document[k] for k in cls.__dataclass_fields__ if k in document})


@dataclass(frozen=True)
class Leaf:
    """A terminal node holding the training class counts that reached it."""

    counts: tuple[int, int]

    @property
    def majority(self) -> int:
        if self.counts[0] > self.counts[1]:
            return 0
        if self.counts[1] > self.counts[0]:
            return 1
        return TIE_CLASS


@dataclass(frozen=True)
class Split:
    """An internal node; rows with ``x[feature] <= threshold`` go left."""

    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


Node = Leaf | Split


def gini_impurity(class_counts) -> float:
    """Returns 1 - p0^2 - p1^2 for a pair of class counts.

    Raises:
        ValueError: If both counts are zero.
    """
    c0, c1 = (int(c) for c in class_counts)
    total = c0 + c1
    if total <= 0:
        raise ValueError("gini impurity is undefined for an empty node")
    p0, p1 = c0 / total, c1 / total
    return 1.0 - p0 * p0 - p1 * p1


@dataclass(frozen=True)
class _SplitCandidate:
    feature: int
    threshold: float
    impurity: float


def _best_split_for_feature(
    x: np.ndarray, y: np.ndarray, min_samples_leaf: int
) -> tuple[float, float] | None:
    """Returns (weighted child impurity, threshold) of the best split on one feature."""
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]

    positives = np.cumsum(ys == 0)
    left_n = np.arange(1, n)
    left_pos = positives[:-1]
    left_neg = left_n - left_pos
    right_n = n - left_n
    right_pos = positives[-1] - left_pos
    right_neg = right_n - right_pos

    valid = (xs[1:] > xs[:-1]) & (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)
    if not valid.any():
        return None

    with np.errstate(divide="ignore", invalid="ignore"):
        gini_left = 1.0 - (left_pos / left_n) ** 2 - (left_neg / left_n) ** 2
        gini_right = 1.0 - (right_pos / right_n) ** 2 - (right_neg / right_n) ** 2
    weighted = (left_n * gini_left + right_n * gini_right) / n
    weighted = np.where(valid, weighted, np.inf)

    # argmin keeps the first minimum, i.e. the lowest threshold.
    i = int(np.argmin(weighted))
    low, high = float(xs[i]), float(xs[i + 1])
    threshold = (low + high) / 2.0
    if not low < threshold < high:
        threshold = low
    return float(weighted[i]), threshold


class _TreeGrower:
    """Grows one tree and accumulates its impurity decrease per feature."""

    def __init__(
        self, X: np.ndarray, y: np.ndarray, params: ForestHyperparams, rng: np.random.Generator
    ):
        self._X = X
        self._y = y
        self._params = params
        self._rng = rng
        self._sample_size = len(y)
        self.importance = np.zeros(X.shape[1])

    def grow(self) -> Node:
        """Builds the tree without recursion, so depth is bounded only by the data.

        Nodes are decided depth first with the left child before the right,
        which fixes the order in which the generator is consumed. A child's id
        is always larger than its parent's.
        """
        decided: dict[int, Leaf | tuple[int, float, int, int]] = {}
        pending = [(0, np.arange(self._sample_size), 0)]
        next_id = 1
        while pending:
            node_id, indices, depth = pending.pop()
            outcome = self._decide(indices, depth)
            if isinstance(outcome, Leaf):
                decided[node_id] = outcome
                continue
            candidate, left_indices, right_indices = outcome
            left_id, right_id = next_id, next_id + 1
            next_id += 2
            decided[node_id] = (candidate.feature, candidate.threshold, left_id, right_id)
            pending.append((right_id, right_indices, depth + 1))
            pending.append((left_id, left_indices, depth + 1))

        built: dict[int, Node] = {}
        for node_id in sorted(decided, reverse=True):
            spec = decided[node_id]
            if isinstance(spec, Leaf):
                built[node_id] = spec
                continue
            feature, threshold, left_id, right_id = spec
            built[node_id] = Split(
                feature=feature,
                threshold=threshold,
                left=built.pop(left_id),
                right=built.pop(right_id),
            )
        return built[0]

    def _decide(
        self, indices: np.ndarray, depth: int
    ) -> "Leaf | tuple[_SplitCandidate, np.ndarray, np.ndarray]":
        """Returns a leaf, or the split for this node with its children's rows."""
        y = self._y[indices]
        counts = np.bincount(y, minlength=CLASS_COUNT)
        leaf = Leaf((int(counts[0]), int(counts[1])))
        params = self._params

        if counts[0] == 0 or counts[1] == 0:
            return leaf
        if params.max_depth is not None and depth >= params.max_depth:
            return leaf
        if len(indices) < 2 * params.min_samples_leaf:
            return leaf

        candidate = self._choose_split(indices, y)
        if candidate is None:
            return leaf

        n = len(indices)
        go_left = self._X[indices, candidate.feature] <= candidate.threshold
        left_indices, right_indices = indices[go_left], indices[~go_left]
        parent_impurity = gini_impurity(leaf.counts)
        decrease = n * (parent_impurity - candidate.impurity) / self._sample_size
        self.importance[candidate.feature] += max(decrease, 0.0)
        return candidate, left_indices, right_indices

    def _choose_split(self, indices: np.ndarray, y: np.ndarray) -> _SplitCandidate | None:
        n_features = self._X.shape[1]
        k = min(self._params.features_per_split, n_features)
        permutation = [int(f) for f in self._rng.permutation(n_features)]

        # Evaluate the drawn features lowest index first so that ties keep the
        # lower feature; fall back to the remaining ones one at a time when none
        # of the drawn features can split this node.
        groups = [sorted(permutation[:k])] + [[f] for f in permutation[k:]]
        for group in groups:
            best: _SplitCandidate | None = None
            for feature in group:
                result = _best_split_for_feature(
                    self._X[indices, feature], y, self._params.min_samples_leaf
                )
                if result is None:
                    continue
                impurity, threshold = result
                if best is None or impurity < best.impurity:
                    best = _SplitCandidate(feature, threshold, impurity)
            if best is not None:
                return best
        return None


@dataclass(frozen=True)
class TreeFit:
    root: Node
    importance: np.ndarray
    """Raw impurity decrease per feature, weighted by node share of the sample."""
    sample: np.ndarray
    """Row indices of the (bootstrap) training sample."""


def fit_tree(
    X: np.ndarray, y: np.ndarray, params: ForestHyperparams, tree_index: int
) -> TreeFit:
    rng = np.random.default_rng(params.seed ^ tree_index)
    n = len(y)
    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)
    grower = _TreeGrower(X[sample], y[sample], params, rng)
    root = grower.grow()
    return TreeFit(root=root, importance=grower.importance, sample=sample)


def fit_forest(
    X: np.ndarray, y: np.ndarray, params: ForestHyperparams, n_jobs: int = 1
) -> list[TreeFit]:
    """Grows `params.tree_count` trees; `n_jobs` never changes the result.

    Raises:
        TrainingError: On mismatched shapes, labels outside {0, 1}, a single
            class, or more features per split than there are features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise TrainingError("features and labels must have the same number of rows")
    if len(y) < 2:
        raise TrainingError("at least two training rows are required")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be 0 or 1")
    if len(np.unique(y)) < CLASS_COUNT:
        raise TrainingError("degenerate training set")
    if params.features_per_split > X.shape[1]:
        raise TrainingError(
            f"features_per_split={params.features_per_split} exceeds {X.shape[1]} features"
        )

    def grow(tree_index: int) -> TreeFit:
        return fit_tree(X, y, params, tree_index)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as executor:
            fits = list(executor.map(grow, range(params.tree_count)))
    else:
        fits = [grow(i) for i in range(params.tree_count)]
    logger.info("grew %d trees on %d rows", len(fits), len(y))
    return fits


def tree_vote(node: Node, x) -> int:
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.majority


def has_split(node: Node) -> bool:
    return isinstance(node, Split)


def node_to_dict(node: Node) -> dict:
    """Nested {feature, threshold, left, right} / {counts} form of a tree."""
    root: dict = {}
    pending = [(node, root)]
    while pending:
        current, target = pending.pop()
        if isinstance(current, Leaf):
            target["counts"] = list(current.counts)
            continue
        left, right = {}, {}
        target.update(feature=current.feature, threshold=current.threshold, left=left, right=right)
        pending.append((current.right, right))
        pending.append((current.left, left))
    return root


def node_from_dict(document: Mapping) -> Node:
    # Post-order walk: a split is visited once to queue its children and once
    # more to build it from the two nodes they left on `built`.
    built: list[Node] = []
    pending: list[tuple[Mapping, bool]] = [(document, False)]
    try:
        while pending:
            current, children_built = pending.pop()
            if "counts" in current:
                c0, c1 = current["counts"]
                built.append(Leaf((int(c0), int(c1))))
            elif not children_built:
                pending.append((current, True))
                pending.append((current["right"], False))
                pending.append((current["left"], False))
            else:
                right = built.pop()
                left = built.pop()
                built.append(
                    Split(
                        feature=int(current["feature"]),
                        threshold=float(current["threshold"]),
                        left=left,
                        right=right,
                    )
                )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed tree node: {e}") from e
    return built[0]
