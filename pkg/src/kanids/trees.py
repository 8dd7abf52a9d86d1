"""CART decision trees and random forests with Gini impurity.

Split candidates sit at midpoints between consecutive distinct sorted values;
the best split maximizes the weighted Gini decrease, with ties broken by
lower feature index and then lower threshold. Rows with a feature value equal
to the threshold route left. Feature importances are mean decrease in
impurity, normalized per tree and averaged over the forest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ForestConfig:
    """Pinned defaults mirroring the usual library settings."""

    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | None = None  # None -> floor(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 when set")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (class_counts)."""

    n_samples: int
    class_counts: tuple | None = None  # set on leaves
    feature_index: int = -1
    threshold: float = 0.0
    impurity_decrease: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.class_counts is not None


def _gini(n0: float, n1: float) -> float:
    n = n0 + n1
    if n == 0:
        return 0.0
    p0 = n0 / n
    p1 = n1 / n
    return 1.0 - p0 * p0 - p1 * p1


def _best_split(X: np.ndarray, y: np.ndarray, features) -> tuple | None:
    """Best (decrease, feature, threshold) over candidate features, or None."""
    n = y.size
    total1 = int(y.sum())
    parent = _gini(n - total1, total1)
    best = None
    for f in features:
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = y[order]
        cuts = np.nonzero(sv[1:] > sv[:-1])[0]
        if cuts.size == 0:
            continue
        c1_left = np.cumsum(sy)[cuts].astype(float)
        n_left = (cuts + 1).astype(float)
        n_right = n - n_left
        c0_left = n_left - c1_left
        c1_right = total1 - c1_left
        c0_right = n_right - c1_right
        g_left = 1.0 - (c0_left / n_left) ** 2 - (c1_left / n_left) ** 2
        g_right = 1.0 - (c0_right / n_right) ** 2 - (c1_right / n_right) ** 2
        decrease = parent - (n_left / n) * g_left - (n_right / n) * g_right
        j = int(np.argmax(decrease))  # first occurrence = lowest threshold
        # strict > keeps the lower feature index on cross-feature ties
        if best is None or decrease[j] > best[0]:
            thr = 0.5 * (sv[cuts[j]] + sv[cuts[j] + 1])
            best = (max(0.0, float(decrease[j])), int(f), float(thr))
    return best


def _grow(X, y, idx, depth, config, max_features, rng) -> TreeNode:
    ys = y[idx]
    n = idx.size
    n1 = int(ys.sum())
    counts = (n - n1, n1)
    if n1 in (0, n) or n < config.min_samples_split or (
            config.max_depth is not None and depth >= config.max_depth):
        return TreeNode(n_samples=n, class_counts=counts)
    d = X.shape[1]
    if rng is not None and max_features < d:
        features = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        features = np.arange(d)
    found = _best_split(X[idx], ys, features)
    if found is None:
        # duplicate rows with conflicting labels: nothing separates them
        return TreeNode(n_samples=n, class_counts=counts)
    decrease, f, thr = found
    mask = X[idx, f] <= thr
    left = _grow(X, y, idx[mask], depth + 1, config, max_features, rng)
    right = _grow(X, y, idx[~mask], depth + 1, config, max_features, rng)
    return TreeNode(n_samples=n, feature_index=f, threshold=thr,
                    impurity_decrease=decrease, left=left, right=right)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("empty data: need at least one row")
    if y.shape != (X.shape[0],):
        raise ValueError("dimension mismatch: labels vs rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return X, y.astype(int)


def fit_tree(X, y, config: ForestConfig | None = None) -> TreeNode:
    """Greedy CART on Gini impurity over all features (no sampling)."""
    X, y = _check_xy(X, y)
    if config is None:
        config = ForestConfig()
    return _grow(X, y, np.arange(X.shape[0]), 0, config, X.shape[1], None)


def _route(node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray):
    if node.is_leaf:
        c0, c1 = node.class_counts
        out[idx] = 0 if c0 >= c1 else 1  # majority; ties to class 0
        return
    mask = X[idx, node.feature_index] <= node.threshold
    _route(node.left, X, idx[mask], out)
    _route(node.right, X, idx[~mask], out)


def predict_tree(tree: TreeNode, X) -> np.ndarray:
    """Route rows by threshold comparisons (value <= threshold goes left)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("dimension mismatch: expected a 2-D matrix")
    out = np.empty(X.shape[0], dtype=int)
    _route(tree, X, np.arange(X.shape[0]), out)
    return out


@dataclass
class Forest:
    trees: list
    config: ForestConfig
    n_features: int
    n_training_rows: int


def fit_forest(X, y, config: ForestConfig = ForestConfig()) -> Forest:
    """Bootstrap-aggregated trees with per-node feature subsampling.

    Tree t draws everything from a generator seeded with config.seed + t
    (bootstrap rows first, then per-node feature subsets in depth-first
    order), so the result is independent of build order.
    """
    X, y = _check_xy(X, y)
    m, d = X.shape
    max_features = config.max_features
    if max_features is None:
        max_features = max(1, int(math.floor(math.sqrt(d))))
    if not 1 <= max_features <= d:
        raise ValueError(f"max_features must be in [1, {d}], got {max_features}")
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(config.seed + t)
        if config.bootstrap:
            idx = rng.integers(0, m, size=m)
        else:
            idx = np.arange(m)
        node_rng = rng if max_features < d else None
        trees.append(_grow(X, y, idx, 0, config, max_features, node_rng))
    return Forest(trees, config, d, m)


def predict_forest(forest: Forest, X) -> np.ndarray:
    """Majority vote over trees; vote ties go to class 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(f"dimension mismatch: {X.shape} vs {forest.n_features} features")
    votes = np.zeros(X.shape[0], dtype=int)
    for tree in forest.trees:
        votes += predict_tree(tree, X)
    return (votes * 2 > len(forest.trees)).astype(int)


def _accumulate_importance(node: TreeNode, m: int, acc: np.ndarray):
    if node.is_leaf:
        return
    acc[node.feature_index] += (node.n_samples / m) * node.impurity_decrease
    _accumulate_importance(node.left, m, acc)
    _accumulate_importance(node.right, m, acc)


def feature_importances(forest: Forest) -> np.ndarray:
    """Mean decrease in impurity per feature, normalized to sum 1.

    Trees without any split contribute a zero vector; if no tree splits, the
    result is all zeros.
    """
    if not forest.trees:
        raise ValueError("unfit forest: no trees")
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        acc = np.zeros(forest.n_features)
        _accumulate_importance(tree, forest.n_training_rows, acc)
        s = acc.sum()
        if s > 0:
            total += acc / s
    s = total.sum()
    return total / s if s > 0 else total


def select_top_n(importances, n: int) -> list:
    """Indices of the n largest importances, descending; ties to lower index."""
    imp = np.asarray(importances, dtype=float)
    if not 1 <= n <= imp.size:
        raise ValueError(f"invalid n: need 1 <= n <= {imp.size}, got {n}")
    order = np.argsort(-imp, kind="stable")  # stable keeps ascending index on ties
    return [int(i) for i in order[:n]]
