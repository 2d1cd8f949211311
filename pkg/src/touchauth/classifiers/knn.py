"""Lazy k-nearest-neighbour classifier over Euclidean distance."""

from __future__ import annotations

import numpy as np


class KNN:
    """Stores the training set verbatim.

    The score of a query is the fraction of genuine labels among its ``k``
    nearest training vectors. Distance ties go to the lower training index.
    """

    algorithm = "knn"

    def __init__(self, X, y, k):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        self.k = int(k)

    @classmethod
    def fit(cls, X, y, config):
        return cls(np.array(X, dtype=float), np.array(y), config.knn_k)

    def neighbors(self, v) -> np.ndarray:
        """Training indices of the ``k`` nearest vectors to a single query."""
        d2 = ((self.X - np.asarray(v, dtype=float)) ** 2).sum(axis=1)
        return np.argsort(d2, kind="stable")[: self.k]

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.y[self.neighbors(v)].mean() for v in X])

    def to_state(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    @classmethod
    def from_state(cls, state):
        return cls(state["X"], state["y"], state["k"])
