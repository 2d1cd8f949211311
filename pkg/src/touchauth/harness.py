"""End-to-end experiment: split, standardize, train, score and report.

For every user the per-user split is built once, one scaler is fitted on
that split's training vectors, and every requested classifier is trained
and scored on the same standardized data.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import ALGORITHMS, DEFAULT_THRESHOLDS, TrainConfig, train
from .dataset import FusedDataset, FusedSample
from .errors import ConfigError
from .features import fit_scaler, select_features, transform
from .fusion import build_user_split, derive_seed, fuse
from .ingest import (
    mapping_for,
    parse_bioident,
    parse_hmog,
    parse_mapping,
    read_canonical,
    write_canonical,
)
from .metrics import TABLE_METRICS, EvalResult, aggregate, evaluate
from .schema import FEATURE_NAMES, N_FEATURES, N_TOUCH

TABLE_LABELS = {
    "accuracy": "Accuracy",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1 Score",
    "eer": "EER",
}
FORMATS = ("json", "csv", "roc")


# -- synthetic data ---------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian clusters, one per user, in a 24-dimensional latent space."""

    users: int = 51
    samples_per_user: int = 100
    separation: float = 3.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.users < 2:
            raise ConfigError("synthetic users must be >= 2")
        if self.samples_per_user < 1:
            raise ConfigError("synthetic samples_per_user must be >= 1")
        if not self.separation > 0 or self.noise < 0:
            raise ConfigError("separation must be > 0 and noise >= 0")


# (offset, scale, kind) per feature. "exp" keeps a value positive,
# "logistic" keeps it in (0, 1) times the offset, "code" rounds to 0..3.
_PHYSICAL = {
    "stroke_duration": (0.3, 0.15, "exp"),
    "start_x": (540.0, 40.0, "linear"),
    "start_y": (960.0, 60.0, "linear"),
    "stop_x": (540.0, 40.0, "linear"),
    "stop_y": (700.0, 60.0, "linear"),
    "direct_end_to_end_distance": (250.0, 0.15, "exp"),
    "mean_resultant_length": (1.0, 0.5, "logistic"),
    "up_down_left_right": (1.5, 0.5, "code"),
    "direction_of_end_to_end_line": (0.0, 0.4, "linear"),
    "largest_deviation_from_end_to_end": (15.0, 0.2, "exp"),
    "average_direction": (0.0, 0.4, "linear"),
    "length_of_trajectory": (280.0, 0.15, "exp"),
    "average_velocity": (900.0, 0.15, "exp"),
    "mid_stroke_pressure": (1.0, 0.5, "logistic"),
    "mid_stroke_area_covered": (0.1, 0.15, "exp"),
    "acc_x": (0.0, 1.0, "linear"),
    "acc_y": (5.0, 1.0, "linear"),
    "acc_z": (8.0, 1.0, "linear"),
    "gyro_x": (0.0, 0.1, "linear"),
    "gyro_y": (0.0, 0.1, "linear"),
    "gyro_z": (0.0, 0.1, "linear"),
    "mag_x": (20.0, 5.0, "linear"),
    "mag_y": (-10.0, 5.0, "linear"),
    "mag_z": (-40.0, 5.0, "linear"),
}


def _to_physical(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    for j, name in enumerate(FEATURE_NAMES):
        offset, scale, kind = _PHYSICAL[name]
        col = z[:, j]
        if kind == "linear":
            out[:, j] = offset + scale * col
        elif kind == "exp":
            out[:, j] = offset * np.exp(scale * col)
        elif kind == "logistic":
            out[:, j] = offset / (1.0 + np.exp(-scale * col))
        else:
            out[:, j] = np.clip(np.round(offset + scale * col), 0, 3)
    dist = FEATURE_NAMES.index("direct_end_to_end_distance")
    traj = FEATURE_NAMES.index("length_of_trajectory")
    out[:, traj] = np.maximum(out[:, traj], out[:, dist])
    return out


def generate_synthetic(spec: SyntheticSpec) -> FusedDataset:
    """Per-user Gaussian clusters mapped onto plausible feature ranges.

    Centers are uniform in ``[-separation, separation]^24`` and samples add
    isotropic noise of std ``noise``. Positive features go through ``exp``,
    bounded ones through a logistic, the direction code is rounded to 0..3,
    and trajectory length is raised to at least the end-to-end distance.
    """
    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    samples = []
    width = len(str(spec.users))
    for u in range(spec.users):
        center = rng.uniform(-spec.separation, spec.separation, size=N_FEATURES)
        z = center + rng.normal(0.0, 1.0, size=(spec.samples_per_user, N_FEATURES)) * spec.noise
        user = f"user{u + 1:0{width}d}"
        for row in _to_physical(z):
            samples.append(FusedSample(user, row[:N_TOUCH], row[N_TOUCH:]))
    return FusedDataset(tuple(samples))


def permute_labels(dataset: FusedDataset, seed) -> FusedDataset:
    """Reassign user ids at random, keeping each user's sample count."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    ids = [s.user_id for s in dataset.samples]
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    samples = tuple(
        FusedSample(u, s.touch, s.motion) for u, s in zip(shuffled, dataset.samples)
    )
    return FusedDataset(samples, roster=dataset.roster)


def fingerprint(dataset: FusedDataset) -> str:
    return hashlib.sha256(write_canonical(dataset)).hexdigest()


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class DataSource:
    """Exactly one of: canonical CSV, stroke + motion exports, or synthetic."""

    dataset: str | None = None
    bioident: str | None = None
    hmog: str | None = None
    mapping: str | None = None
    hmog_session: str | None = None
    pairing: str = "identity"
    samples_per_user: int | None = 100
    synthetic: SyntheticSpec | None = None

    def __post_init__(self):
        kinds = [self.dataset is not None,
                 self.bioident is not None or self.hmog is not None,
                 self.synthetic is not None]
        if sum(kinds) != 1:
            raise ConfigError("exactly one dataset source is required")
        if kinds[1] and (self.bioident is None or self.hmog is None):
            raise ConfigError("fusing needs both a stroke and a motion export")

    def load(self, seed=0) -> FusedDataset:
        if self.synthetic is not None:
            return generate_synthetic(self.synthetic)
        if self.dataset is not None:
            return read_canonical(Path(self.dataset))
        mapping = parse_mapping(Path(self.mapping)) if self.mapping else None
        strokes = parse_bioident(Path(self.bioident), schema=mapping_for(mapping, "bioident"))
        motions = parse_hmog(Path(self.hmog), schema=mapping_for(mapping, "hmog"),
                             session=self.hmog_session)
        return fuse(strokes, motions, pairing=self.pairing, seed=seed,
                    samples_per_user=self.samples_per_user)

    def describe(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if v is not None and k != "synthetic"}
        if self.synthetic is not None:
            out = {f"synthetic_{k}": v for k, v in self.synthetic.__dict__.items()}
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    source: DataSource | None = None
    seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS
    train: dict = field(default_factory=dict)
    drop_features: tuple[str, ...] = ()
    jobs: int = 1

    def __post_init__(self):
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms: {bad}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            select_features(self.drop_features)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for algo in self.algorithms:
            self.train_config(algo, 0)

    def train_config(self, algo, seed) -> TrainConfig:
        return TrainConfig(algorithm=algo, seed=seed, **self.train)

    def echo(self) -> dict:
        """Settings that determine the report (``jobs`` excluded)."""
        out = {
            "seed": int(self.seed),
            "algorithms": ",".join(self.algorithms),
            "drop_features": ",".join(self.drop_features),
        }
        out.update({k: self.train[k] for k in sorted(self.train)})
        if self.source is not None:
            out.update(self.source.describe())
        return out


_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"algorithm", "seed"}
_SOURCE_KEYS = {"dataset", "bioident", "hmog", "mapping", "hmog_session", "pairing",
                "samples_per_user"}
_STRING_KEYS = _SOURCE_KEYS - {"samples_per_user"} | {"svm_kernel"}


def _coerce(key, value: str):
    if key in _STRING_KEYS:
        return value
    if value.lower() in ("none", "unlimited"):
        return None
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments) into a dict of strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key] = value
    return values


def build_config(values: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from string key/value settings.

    Recognized keys: ``seed``, ``algo``/``algorithms`` (comma list or
    ``all``), ``drop_features``, ``jobs``, every :class:`TrainConfig` field
    except ``algorithm``/``seed``, the :class:`DataSource` fields, and
    ``synthetic`` / ``synthetic_<field>`` for a :class:`SyntheticSpec`.
    """
    train, source, synth = {}, {}, {}
    use_synthetic = False
    seed, algorithms, drop, jobs = 0, ALGORITHMS, (), 1
    for key, raw in values.items():
        raw = str(raw).strip()
        if key == "seed":
            seed = _coerce(key, raw)
        elif key in ("algo", "algorithms"):
            algorithms = ALGORITHMS if raw == "all" else tuple(
                a.strip() for a in raw.split(",") if a.strip())
        elif key == "drop_features":
            drop = tuple(a.strip() for a in raw.split(",") if a.strip())
        elif key == "jobs":
            jobs = _coerce(key, raw)
        elif key in _TRAIN_KEYS:
            train[key] = _coerce(key, raw)
        elif key in _SOURCE_KEYS:
            source[key] = _coerce(key, raw)
        elif key == "synthetic":
            use_synthetic = _coerce(key, raw) is True
        elif key.startswith("synthetic_"):
            synth[key[len("synthetic_"):]] = _coerce(key, raw)
            use_synthetic = True
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(seed, int) or not isinstance(jobs, int):
        raise ConfigError("seed and jobs must be integers")
    try:
        if use_synthetic:
            source["synthetic"] = SyntheticSpec(**synth)
        src = DataSource(**source) if source else None
        return ExperimentConfig(source=src, seed=seed, algorithms=algorithms,
                                train=train, drop_features=drop, jobs=jobs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# -- running ----------------------------------------------------------------


def evaluate_split(dataset: FusedDataset, split, algorithms, config: ExperimentConfig):
    """Train and score every algorithm on one prepared split."""
    kept = list(select_features(config.drop_features))
    X_train = dataset.matrix(split.train_indices)[:, kept]
    X_test = dataset.matrix(split.test_indices)[:, kept]
    scaler = fit_scaler(X_train, names=tuple(FEATURE_NAMES[i] for i in kept))
    Z_train, Z_test = transform(scaler, X_train), transform(scaler, X_test)
    results = {}
    for algo in algorithms:
        model = train(config.train_config(algo, derive_seed(split.seed, algo)),
                      Z_train, split.train_labels)
        scores = model.score(Z_test)
        results[algo] = evaluate(scores, split.test_labels, DEFAULT_THRESHOLDS[algo])
    return results


def run_user(dataset: FusedDataset, target, algo, config: ExperimentConfig) -> EvalResult:
    """Split, standardize, train and evaluate one user with one algorithm."""
    split = build_user_split(dataset, target, derive_seed(config.seed, target))
    return evaluate_split(dataset, split, (algo,), config)[algo]


def _user_task(args):
    dataset, user, config = args
    split = build_user_split(dataset, user, derive_seed(config.seed, user))
    return user, evaluate_split(dataset, split, config.algorithms, config)


def natural_key(user_id: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", str(user_id))]


@dataclass
class Report:
    """Per-user results and per-algorithm averages of one experiment."""

    results: dict  # algo -> {user: EvalResult}
    config: dict
    dataset_fingerprint: str
    version: str = __version__

    @property
    def algorithms(self) -> list[str]:
        return [a for a in ALGORITHMS if a in self.results]

    def users(self, algo) -> list[str]:
        return sorted(self.results[algo], key=natural_key)

    @property
    def averages(self) -> dict:
        return {
            a: aggregate(self.results[a][u] for u in self.users(a))
            for a in self.algorithms
        }

    def to_json(self) -> str:
        payload = {
            "tool": "touchauth",
            "version": self.version,
            "config": self.config,
            "dataset_fingerprint": self.dataset_fingerprint,
            "averages": self.averages,
            "results": {
                a: {u: self.results[a][u].to_dict() for u in self.users(a)}
                for a in self.algorithms
            },
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        payload = json.loads(text)
        results = {
            a: {u: EvalResult.from_dict(d) for u, d in per_user.items()}
            for a, per_user in payload["results"].items()
        }
        return cls(results=results, config=payload["config"],
                   dataset_fingerprint=payload["dataset_fingerprint"],
                   version=payload["version"])


def run_all(config: ExperimentConfig, dataset: FusedDataset | None = None) -> Report:
    """Evaluate every roster user with every configured algorithm."""
    if dataset is None:
        if config.source is None:
            raise ConfigError("no dataset source configured")
        dataset = config.source.load(seed=config.seed)
    tasks = [(dataset, u, config) for u in dataset.roster]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_user_task, tasks))
    else:
        outcomes = [_user_task(t) for t in tasks]
    results = {a: {} for a in config.algorithms}
    for user, per_algo in outcomes:
        for algo, result in per_algo.items():
            results[algo][user] = result
    return Report(results=results, config=config.echo(),
                  dataset_fingerprint=fingerprint(dataset))


# -- output -----------------------------------------------------------------


def _pct(value: float) -> str:
    return f"{100.0 * value:.2f}"


def table_csv(report: Report) -> str:
    """Averages in the layout of the per-algorithm summary table (percent)."""
    algos = report.algorithms
    header = "metric," + ",".join(a.upper() for a in algos) if algos else "metric"
    lines = [header]
    averages = report.averages
    if algos and any(report.results[a] for a in algos):
        for m in TABLE_METRICS:
            lines.append(TABLE_LABELS[m] + "," + ",".join(_pct(averages[a][m]) for a in algos))
    return "\n".join(lines) + "\n"


def per_user_csv(report: Report) -> str:
    cols = ("tp", "fp", "tn", "fn") + TABLE_METRICS + ("auc", "far", "frr")
    lines = ["algorithm,user," + ",".join(cols)]
    for a in report.algorithms:
        for u in report.users(a):
            r = report.results[a][u]
            cm = r.confusion
            cells = [str(cm.tp), str(cm.fp), str(cm.tn), str(cm.fn)]
            cells += [_pct(r.metric(m)) for m in TABLE_METRICS]
            cells += [f"{r.auc:.4f}", _pct(r.far), _pct(r.frr)]
            lines.append(f"{a},{u}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def roc_text(result: EvalResult) -> str:
    lines = ["far tar"]
    lines += [f"{x!r} {y!r}" for x, y in result.roc.points()]
    return "\n".join(lines) + "\n"


def emit(report: Report, out_dir, formats=FORMATS) -> list[Path]:
    """Write the requested output formats under ``out_dir``.

    ``json`` -> report.json; ``csv`` -> table.csv and per_user.csv;
    ``roc`` -> roc/<algo>/<user>.txt with one ``far tar`` pair per line.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(path, text):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
        written.append(path)

    for fmt in formats:
        if fmt in ("json", "json-like"):
            put(out / "report.json", report.to_json())
        elif fmt == "csv":
            put(out / "table.csv", table_csv(report))
            put(out / "per_user.csv", per_user_csv(report))
        elif fmt == "roc":
            for a in report.algorithms:
                for u in report.users(a):
                    put(out / "roc" / a / f"{u}.txt", roc_text(report.results[a][u]))
        else:
            raise ConfigError(f"unknown format {fmt!r}")
    return written


def averages_from_rows(per_user: str) -> dict:
    """Recompute percentage averages from a per_user.csv text (self-check)."""
    lines = per_user.strip().splitlines()
    header = lines[0].split(",")
    sums: dict = {}
    for line in lines[1:]:
        cells = dict(zip(header, line.split(",")))
        bucket = sums.setdefault(cells["algorithm"], {m: [] for m in TABLE_METRICS})
        for m in TABLE_METRICS:
            bucket[m].append(float(cells[m]))
    return {a: {m: math.fsum(v) / len(v) for m, v in b.items()} for a, b in sums.items()}
