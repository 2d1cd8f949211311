"""Random forest of CART trees split on Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Candidates within this distance of the best weighted Gini count as ties;
# the first one in (feature, threshold) order wins.
_TIE_TOL = 1e-12


@dataclass
class Tree:
    """Flat binary tree. ``feature[k] == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left. ``value`` holds the
    genuine fraction of the training samples that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return self.value[node]

    def to_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_state(cls, state) -> "Tree":
        return cls(
            feature=np.array(state["feature"], dtype=np.int64),
            threshold=np.array(state["threshold"], dtype=float),
            left=np.array(state["left"], dtype=np.int64),
            right=np.array(state["right"], dtype=np.int64),
            value=np.array(state["value"], dtype=float),
        )


def weighted_gini(n_pos_left, n_left, n_pos_right, n_right):
    """Size-weighted Gini impurity of a two-way split (works on arrays)."""
    n = n_left + n_right
    g_left = 2.0 * n_pos_left * (n_left - n_pos_left) / n_left
    g_right = 2.0 * n_pos_right * (n_right - n_pos_right) / n_right
    return (g_left + g_right) / n


def best_split(X, y, features, min_leaf=1):
    """Exhaustive Gini search over ``features`` of the node data ``(X, y)``.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns ``(feature, threshold, impurity)`` or ``None`` when no
    candidate leaves at least ``min_leaf`` samples on both sides.
    """
    n = len(y)
    features = np.sort(np.asarray(features))
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    vals = np.take_along_axis(cols, order, axis=0)
    pos = np.cumsum(y[order], axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    total_pos = float(y.sum())
    valid = (vals[1:] > vals[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        g = weighted_gini(pos, n_left, total_pos - pos, n_right)
    g = np.where(valid, g, np.inf)
    best = g.min()
    # First candidate in (feature, threshold) order within tolerance of the best.
    rows, cols_idx = np.nonzero(g.T <= best + _TIE_TOL)
    k, i = rows[0], cols_idx[0]
    lo, hi = vals[i, k], vals[i + 1, k]
    threshold = (lo + hi) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return int(features[k]), float(threshold), float(best)


def grow_tree(X, y, rng, max_depth=None, min_leaf=1, max_features=None) -> Tree:
    """Grow one CART tree on ``(X, y)`` with labels in {0, 1}."""
    n, d = X.shape
    max_features = d if max_features is None else max_features
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        pure = ys.min() == ys.max()
        if pure or (max_depth is not None and depth >= max_depth) or len(rows) < 2 * min_leaf:
            continue
        if max_features < d:
            candidates = rng.choice(d, size=max_features, replace=False)
        else:
            candidates = np.arange(d)
        split = best_split(X[rows], ys, candidates, min_leaf)
        if split is None:
            continue
        f, t, _ = split
        go_left = X[rows, f] <= t
        feature[node], threshold[node] = f, t
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
    )


class RandomForest:
    """Bagged CART trees; the score is the fraction of trees voting genuine.

    A tree votes genuine when the genuine fraction of its leaf is >= 0.5.
    Tree ``t`` draws its bootstrap sample and feature subsets from a
    generator seeded by ``(seed, t)``, so trees are independent of build
    order.
    """

    algorithm = "rf"

    def __init__(self, trees):
        self.trees = list(trees)

    @classmethod
    def fit(cls, X, y, config):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        trees = []
        for t in range(config.rf_trees):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(int(config.seed), spawn_key=(t,)))
            )
            rows = rng.integers(0, n, size=n) if config.rf_bootstrap else np.arange(n)
            trees.append(
                grow_tree(
                    X[rows],
                    y[rows],
                    rng,
                    max_depth=config.rf_max_depth,
                    min_leaf=config.rf_min_leaf,
                    max_features=config.features_per_split(d),
                )
            )
        return cls(trees)

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += tree.leaf_values(X) >= 0.5
        return votes / len(self.trees)

    def to_state(self):
        return {"trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, state):
        return cls([Tree.from_state(t) for t in state["trees"]])
