"""Feature-vector assembly and z-score standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FusedSample
from .schema import FEATURE_NAMES

CONSTANT_STD = 1e-12


def assemble(sample: FusedSample) -> np.ndarray:
    """The 24 feature values of ``sample`` in canonical column order."""
    return np.array(sample.values, dtype=float)


def assemble_matrix(samples) -> np.ndarray:
    rows = [s.values for s in samples]
    return np.array(rows, dtype=float).reshape(len(rows), len(FEATURE_NAMES))


def select_features(drop=()) -> tuple[int, ...]:
    """Column indices kept after dropping the named features.

    The default keeps all 24; dropping is an ablation hook.
    """
    unknown = set(drop) - set(FEATURE_NAMES)
    if unknown:
        raise ValueError(f"unknown feature names: {sorted(unknown)}")
    kept = tuple(i for i, name in enumerate(FEATURE_NAMES) if name not in set(drop))
    if not kept:
        raise ValueError("cannot drop every feature")
    return kept


@dataclass(frozen=True)
class Scaler:
    """Per-feature mean/std fitted on a training set.

    Features whose std is below ``1e-12`` are masked and map to 0.
    """

    mean: np.ndarray
    std: np.ndarray
    masked: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    def to_text(self) -> str:
        lines = ["feature mean std masked"]
        for name, m, s, k in zip(self.names, self.mean, self.std, self.masked):
            lines.append(f"{name} {float(m)!r} {float(s)!r} {int(bool(k))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Scaler":
        rows = [line.split() for line in text.strip().splitlines()[1:]]
        return cls(
            mean=np.array([float(r[1]) for r in rows]),
            std=np.array([float(r[2]) for r in rows]),
            masked=np.array([r[3] == "1" for r in rows]),
            names=tuple(r[0] for r in rows),
        )


def fit_scaler(train, names=FEATURE_NAMES) -> Scaler:
    """Fit means and population standard deviations on ``train`` (n, d)."""
    X = np.asarray(train, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_scaler needs at least two training vectors")
    if len(names) != X.shape[1]:
        names = tuple(f"f{i}" for i in range(X.shape[1]))
    mean = X.mean(axis=0)
    std = np.sqrt(((X - mean) ** 2).mean(axis=0))
    masked = std < CONSTANT_STD
    return Scaler(mean=mean, std=std, masked=masked, names=tuple(names))


def transform(scaler: Scaler, v) -> np.ndarray:
    """Standardize one vector (d,) or a matrix (n, d)."""
    X = np.asarray(v, dtype=float)
    safe = np.where(scaler.masked, 1.0, scaler.std)
    return np.where(scaler.masked, 0.0, (X - scaler.mean) / safe)


def inverse_transform(scaler: Scaler, z) -> np.ndarray:
    """Undo :func:`transform`; masked features come back as their mean."""
    Z = np.asarray(z, dtype=float)
    return np.where(scaler.masked, scaler.mean, Z * scaler.std + scaler.mean)
