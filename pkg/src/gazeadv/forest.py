"""Random forest classifier built on bootstrapped Gini decision trees.

Serves as the gradient-free transfer target: it exposes predictions and
leaf probability averages only, never input gradients.  Each node searches
a random sqrt(d) feature subset; leaves respect ``min_samples_leaf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RF_TREE_GRID = (100, 50, 10, 200)
RF_LEAF_GRID = (50, 10, 100, 5)


@dataclass(frozen=True)
class RfTrainConfig:
    n_trees: int = RF_TREE_GRID[0]
    min_samples_leaf: int = RF_LEAF_GRID[0]
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")


@dataclass(frozen=True)
class DecisionTree:
    """Binary tree in array form; feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # per-node class probabilities


@dataclass(frozen=True)
class RandomForestModel:
    classes: tuple
    n_features: int
    trees: tuple


def _best_split(X, y_idx, rows, feats, min_leaf, n_classes):
    """Lowest weighted-Gini split over the candidate features.

    Returns (gini, feature, threshold) or None when no split leaves
    ``min_leaf`` samples on both sides.
    """
    m = len(rows)
    best_gini, best_feat, best_thr = np.inf, -1, 0.0
    labels = y_idx[rows]
    onehot = np.zeros((m, n_classes))
    onehot[np.arange(m), labels] = 1.0
    for f in feats:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        counts_left = np.cumsum(onehot[order], axis=0)[:-1]  # split after row p
        n_left = np.arange(1, m)
        n_right = m - n_left
        valid = (vs[1:] > vs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        counts_right = counts_left[-1] + onehot[order][-1] - counts_left
        gini_left = 1.0 - np.sum((counts_left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((counts_right / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / m
        weighted = np.where(valid, weighted, np.inf)
        p = int(np.argmin(weighted))
        if weighted[p] < best_gini:
            best_gini = float(weighted[p])
            best_feat = int(f)
            best_thr = float((vs[p] + vs[p + 1]) / 2.0)
    if best_feat < 0:
        return None
    return best_gini, best_feat, best_thr


def _grow_tree(X, y_idx, rows, n_classes, min_leaf, max_features, rng):
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(node_rows):
        node = len(feature)
        counts = np.bincount(y_idx[node_rows], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return node, counts

    stack = [(rows, None, None)]
    while stack:
        node_rows, parent, side = stack.pop()
        node, counts = new_node(node_rows)
        if parent is not None:
            (left if side == "L" else right)[parent] = node
        if np.count_nonzero(counts) <= 1 or len(node_rows) < 2 * min_leaf:
            continue
        feats = rng.permutation(X.shape[1])[:max_features]
        split = _best_split(X, y_idx, node_rows, feats, min_leaf, n_classes)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[node_rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        # push right first so the left child is grown (and numbered) first
        stack.append((node_rows[~go_left], node, "R"))
        stack.append((node_rows[go_left], node, "L"))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=float),
    )


def train_rf(X, y, config: RfTrainConfig = RfTrainConfig()) -> RandomForestModel:
    """Fit bootstrapped Gini trees; deterministic for a fixed seed."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    y = np.asarray([str(v) for v in np.asarray(y, dtype=object)], dtype=object)
    if len(y) != len(X):
        raise ValueError("labels length does not match features")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise ValueError("degenerate training set: fewer than 2 classes")
    index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([index[v] for v in y], dtype=np.intp)

    n, d = X.shape
    max_features = max(1, int(math.isqrt(d)))
    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, n)
        trees.append(
            _grow_tree(X, y_idx, rows, len(classes), config.min_samples_leaf,
                       max_features, rng)
        )
    return RandomForestModel(classes=classes, n_features=d, trees=tuple(trees))


def _tree_probabilities(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    nodes = np.zeros(len(X), dtype=np.int32)
    while True:
        internal = tree.feature[nodes] >= 0
        if not internal.any():
            break
        idx = np.nonzero(internal)[0]
        feats = tree.feature[nodes[idx]]
        go_left = X[idx, feats] <= tree.threshold[nodes[idx]]
        nodes[idx] = np.where(go_left, tree.left[nodes[idx]], tree.right[nodes[idx]])
    return tree.value[nodes]


def rf_probabilities(model: RandomForestModel, X) -> np.ndarray:
    """Mean of per-tree leaf distributions, shape (n, n_classes)."""
    X = np.asarray(X, dtype=float)
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    probs = np.zeros((len(X), len(model.classes)))
    for tree in model.trees:
        probs += _tree_probabilities(tree, X)
    return probs / len(model.trees)


def rf_predict_batch(model: RandomForestModel, X) -> np.ndarray:
    probs = rf_probabilities(model, X)
    idx = np.argmax(probs, axis=1)  # lowest index wins ties
    return np.array([model.classes[i] for i in idx], dtype=object)


def rf_predict(model: RandomForestModel, x) -> tuple[str, np.ndarray]:
    """Predicted class and averaged probability vector for one sample."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("rf_predict expects a single feature vector")
    probs = rf_probabilities(model, x[None, :])[0]
    return model.classes[int(np.argmax(probs))], probs


def sweep_rf_grid(
    X_train,
    y_train,
    X_val,
    y_val,
    tree_grid=RF_TREE_GRID,
    leaf_grid=RF_LEAF_GRID,
    seed: int = 0,
):
    """Train one forest per grid cell and keep the best validation accuracy.

    Ties resolve to the earlier grid position, so the sweep is
    deterministic.  Returns (best config, best model, {config: accuracy}).
    """
    y_val = np.asarray([str(v) for v in np.asarray(y_val, dtype=object)], dtype=object)
    combos = [(t, l) for t in tree_grid for l in leaf_grid]
    streams = np.random.SeedSequence(seed).spawn(len(combos))
    best = None
    accuracies = {}
    for (n_trees, leaf), ss in zip(combos, streams):
        config = RfTrainConfig(n_trees=n_trees, min_samples_leaf=leaf,
                               seed=int(ss.generate_state(1)[0]))
        model = train_rf(X_train, y_train, config)
        acc = float(np.mean(rf_predict_batch(model, X_val) == y_val))
        accuracies[(n_trees, leaf)] = acc
        if best is None or acc > best[0]:
            best = (acc, config, model)
    return best[1], best[2], accuracies
