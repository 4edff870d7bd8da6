"""CART-style regression tree grown greedily by squared-error reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyTrainingSet, ValidationError

DEFAULT_MAX_DEPTH = 8
DEFAULT_MIN_SAMPLES_LEAF = 3
DEFAULT_MIN_VARIANCE_REDUCTION = 1e-7


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = DEFAULT_MAX_DEPTH
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF
    min_variance_reduction: float = DEFAULT_MIN_VARIANCE_REDUCTION

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1 (or None for unbounded)")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.min_variance_reduction < 0:
            raise ValidationError("min_variance_reduction must be >= 0")


class RegressionTree:
    """Flat-array binary tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise rows with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]``. Leaves predict the
    mean training target that reached them.
    """

    def __init__(self, feature, threshold, left, right, value, n_samples, n_features, params=None, seed=0):
        self.feature = np.asarray(feature, dtype=np.int_)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int_)
        self.right = np.asarray(right, dtype=np.int_)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int_)
        self.n_features = int(n_features)
        self.params = params or TreeParams()
        self.seed = seed

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int_)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return kernels.predict_batch(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row reaches."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int_)
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[i] = node
        return out

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict, params: TreeParams | None = None, seed=0) -> "RegressionTree":
        return cls(
            doc["feature"],
            [np.nan if t is None else t for t in doc["threshold"]],
            doc["left"],
            doc["right"],
            doc["value"],
            doc["n_samples"],
            doc["n_features"],
            params,
            seed,
        )


def _leaf_value(y: np.ndarray) -> float:
    # identical targets: return one exactly instead of a rounded mean
    if np.all(y == y[0]):
        return float(y[0])
    return float(np.mean(y))


def train(X, targets, params: TreeParams | None = None, seed: int = 0) -> RegressionTree:
    """Grow a tree depth-first. The build is deterministic; ``seed`` is only recorded."""
    params = params or TreeParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainingSet("training matrix has no rows")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} targets")

    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(_leaf_value(y[rows]))
        counts.append(len(rows))
        return len(feature) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        n = len(rows)
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if n < 2 * params.min_samples_leaf:
            continue
        ys = y[rows]
        if np.all(ys == ys[0]):
            continue
        f, thr, gain = kernels.best_split(X[rows], ys - np.mean(ys), params.min_samples_leaf)
        if f < 0 or gain / n < params.min_variance_reduction:
            continue
        mask = X[rows, f] <= thr
        feature[node] = int(f)
        threshold[node] = float(thr)
        lo = new_node(rows[mask])
        hi = new_node(rows[~mask])
        left[node], right[node] = lo, hi
        # push right first so the left subtree is numbered first
        stack.append((hi, rows[~mask], depth + 1))
        stack.append((lo, rows[mask], depth + 1))

    return RegressionTree(feature, threshold, left, right, value, counts, X.shape[1], params, seed)


def predict(tree: RegressionTree, feature_vector) -> float:
    vec = np.asarray(feature_vector, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    return float(tree.predict(vec)[0])


def training_mse(tree: RegressionTree, X, targets) -> float:
    return float(np.mean((tree.predict(X) - np.asarray(targets, dtype=np.float64)) ** 2))
