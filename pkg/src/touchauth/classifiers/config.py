from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

ALGORITHMS = ("rf", "svm", "knn")
KERNELS = ("linear", "rbf")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one classifier.

    ``rf_features_per_split=None`` means ``ceil(sqrt(d))`` and
    ``svm_gamma=None`` means ``1/d``; with the 24 fused features these are 5
    and 1/24. SMO gives up after ``svm_max_passes * n`` pair updates.
    """

    algorithm: str = "rf"
    rf_trees: int = 100
    rf_max_depth: int | None = None
    rf_min_leaf: int = 1
    rf_features_per_split: int | None = None
    rf_bootstrap: bool = True
    knn_k: int = 5
    svm_c: float = 1.0
    svm_kernel: str = "rbf"
    svm_gamma: float | None = None
    svm_tol: float = 1e-3
    svm_max_passes: int = 10
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.rf_trees < 1:
            raise ConfigError("rf_trees must be >= 1")
        if self.rf_max_depth is not None and self.rf_max_depth < 0:
            raise ConfigError("rf_max_depth must be >= 0")
        if self.rf_min_leaf < 1:
            raise ConfigError("rf_min_leaf must be >= 1")
        if self.rf_features_per_split is not None and self.rf_features_per_split < 1:
            raise ConfigError("rf_features_per_split must be >= 1")
        if self.knn_k < 1 or self.knn_k % 2 == 0:
            raise ConfigError("knn_k must be a positive odd number")
        if self.knn_k > 160:
            raise ConfigError("knn_k must be <= 160")
        if not self.svm_c > 0 or not math.isfinite(self.svm_c):
            raise ConfigError("svm_c must be positive")
        if self.svm_kernel not in KERNELS:
            raise ConfigError(f"unknown svm_kernel {self.svm_kernel!r}")
        if self.svm_gamma is not None and not self.svm_gamma > 0:
            raise ConfigError("svm_gamma must be positive")
        if not self.svm_tol > 0:
            raise ConfigError("svm_tol must be positive")
        if self.svm_max_passes < 1:
            raise ConfigError("svm_max_passes must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def features_per_split(self, d: int) -> int:
        if self.rf_features_per_split is None:
            return math.ceil(math.sqrt(d))
        return min(self.rf_features_per_split, d)

    def gamma(self, d: int) -> float:
        return 1.0 / d if self.svm_gamma is None else float(self.svm_gamma)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**values)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)
