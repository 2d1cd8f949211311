"""Fused sample and dataset containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schema import N_FEATURES, N_MOTION, N_TOUCH


@dataclass(frozen=True)
class FusedSample:
    """One labeled observation: 15 touch values followed by 9 motion values."""

    user_id: str
    touch: tuple[float, ...]
    motion: tuple[float, ...]

    def __post_init__(self):
        touch = tuple(float(v) for v in self.touch)
        motion = tuple(float(v) for v in self.motion)
        if len(touch) != N_TOUCH or len(motion) != N_MOTION:
            raise ValueError(
                f"expected {N_TOUCH} touch and {N_MOTION} motion values, "
                f"got {len(touch)} and {len(motion)}"
            )
        if not all(math.isfinite(v) for v in touch + motion):
            raise ValueError(f"non-finite feature value for user {self.user_id!r}")
        object.__setattr__(self, "user_id", str(self.user_id))
        object.__setattr__(self, "touch", touch)
        object.__setattr__(self, "motion", motion)

    @property
    def values(self) -> tuple[float, ...]:
        return self.touch + self.motion


@dataclass(frozen=True)
class FusedDataset:
    """Ordered samples plus the roster of distinct users (first-seen order)."""

    samples: tuple[FusedSample, ...]
    roster: tuple[str, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple(self.samples)
        index: dict[str, list[int]] = {}
        for i, s in enumerate(samples):
            index.setdefault(s.user_id, []).append(i)
        roster = tuple(self.roster) if self.roster else tuple(index)
        if set(roster) != set(index) or len(set(roster)) != len(roster):
            raise ValueError("roster does not match the users present in samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "roster", roster)
        object.__setattr__(
            self, "_index", {u: tuple(ix) for u, ix in index.items()}
        )

    def __len__(self):
        return len(self.samples)

    def indices_of(self, user_id) -> tuple[int, ...]:
        """Dataset indices of ``user_id``'s samples, in dataset order."""
        return self._index.get(str(user_id), ())

    def matrix(self, indices=None) -> np.ndarray:
        """Feature matrix (n, 24) for the given sample indices (all by default)."""
        rows = self.samples if indices is None else [self.samples[i] for i in indices]
        if not rows:
            return np.empty((0, N_FEATURES))
        return np.array([s.values for s in rows], dtype=float)

    def user_ids(self, indices=None) -> list[str]:
        rows = self.samples if indices is None else [self.samples[i] for i in indices]
        return [s.user_id for s in rows]
