"""Per-user binary classifiers behind one train/score/predict interface.

Labels are 1 for the genuine user and 0 for impostors. Scores grow with
genuineness: RF and KNN return vote fractions in [0, 1], SVM its raw
decision value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from .config import ALGORITHMS, TrainConfig
from .forest import RandomForest
from .knn import KNN
from .svm import SVM

MODEL_FORMAT = "touchauth-model"
MODEL_VERSION = 1

_MODELS = {"rf": RandomForest, "svm": SVM, "knn": KNN}

DEFAULT_THRESHOLDS = {"rf": 0.5, "knn": 0.5, "svm": 0.0}

GENUINE = "genuine"
IMPOSTOR = "impostor"


@dataclass(frozen=True)
class Decision:
    verdict: str
    score: float
    threshold: float

    @property
    def genuine(self) -> bool:
        return self.verdict == GENUINE


def _check_finite(X):
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature value")


def train(config: TrainConfig, X, y):
    """Fit the classifier selected by ``config.algorithm`` on ``(X, y)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise TrainingError("X must be (n, d) with one label per row")
    _check_finite(X)
    if not set(np.unique(y)) <= {0, 1}:
        raise TrainingError("labels must be 0 (impostor) or 1 (genuine)")
    if len(np.unique(y)) < 2:
        raise TrainingError("training set contains a single class")
    if config.algorithm == "knn" and config.knn_k > len(X):
        raise TrainingError(f"knn_k={config.knn_k} exceeds training size {len(X)}")
    model = _MODELS[config.algorithm].fit(X, y, config)
    model.config = config
    return model


def score(model, v):
    """Genuine-score of one vector (float) or of each row of a matrix."""
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite feature value")
    out = model.score(arr)
    return float(out[0]) if arr.ndim == 1 else out


def predict(model, v, threshold=None) -> Decision:
    """Genuine iff score >= threshold (default 0.5 for RF/KNN, 0 for SVM)."""
    if threshold is None:
        threshold = DEFAULT_THRESHOLDS[model.algorithm]
    s = score(model, v)
    return Decision(GENUINE if s >= threshold else IMPOSTOR, s, float(threshold))


def dumps(model) -> str:
    """Serialize a trained model to versioned JSON text."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "algorithm": model.algorithm,
        "config": model.config.to_dict() if getattr(model, "config", None) else None,
        "state": model.to_state(),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def loads(text: str):
    payload = json.loads(text)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized model")
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {payload.get('version')}")
    model = _MODELS[payload["algorithm"]].from_state(payload["state"])
    if payload["config"] is not None:
        model.config = TrainConfig.from_dict(payload["config"])
    return model


__all__ = [
    "ALGORITHMS",
    "DEFAULT_THRESHOLDS",
    "Decision",
    "GENUINE",
    "IMPOSTOR",
    "KNN",
    "RandomForest",
    "SVM",
    "TrainConfig",
    "dumps",
    "loads",
    "predict",
    "score",
    "train",
]
