"""Verification metrics: confusion counts, ROC/AUC and equal error rate.

The genuine user is the positive class. A sample is accepted when its score
is >= the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TABLE_METRICS = ("accuracy", "precision", "recall", "f1", "eer")
AVERAGED_METRICS = TABLE_METRICS + ("auc", "far", "frr")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(verdicts, labels) -> ConfusionMatrix:
    """Count the four cells. ``verdicts`` holds Decisions or booleans."""
    verdicts = [bool(getattr(v, "genuine", v)) for v in verdicts]
    labels = [int(v) for v in labels]
    if len(verdicts) != len(labels) or not labels:
        raise ValueError("verdicts and labels must be non-empty and equally long")
    tp = sum(1 for v, y in zip(verdicts, labels) if v and y == 1)
    fp = sum(1 for v, y in zip(verdicts, labels) if v and y == 0)
    tn = sum(1 for v, y in zip(verdicts, labels) if not v and y == 0)
    fn = sum(1 for v, y in zip(verdicts, labels) if not v and y == 1)
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num, den):
    return num / den if den else 0.0


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.n)


def precision(cm: ConfusionMatrix) -> float:
    """tp / (tp + fp); 0 when nothing was accepted (see :func:`flags`)."""
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix) -> float:
    """True acceptance rate, tp / (tp + fn)."""
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return _ratio(2 * p * r, p + r)


def far(cm: ConfusionMatrix) -> float:
    return _ratio(cm.fp, cm.fp + cm.tn)


def frr(cm: ConfusionMatrix) -> float:
    return _ratio(cm.fn, cm.tp + cm.fn)


def flags(cm: ConfusionMatrix) -> tuple[str, ...]:
    """Names of the zero-denominator cases that forced a metric to 0."""
    out = []
    if cm.tp + cm.fp == 0:
        out.append("no-positives")
    if cm.tp + cm.fn == 0:
        out.append("no-genuine")
    if cm.fp + cm.tn == 0:
        out.append("no-impostors")
    return tuple(out)


@dataclass(frozen=True)
class RocCurve:
    """Operating points from the strictest threshold to the loosest.

    ``thresholds[0]`` is ``+inf`` (the (0, 0) endpoint); every other entry
    is a distinct score and the last point is always (1, 1).
    """

    far: np.ndarray
    tar: np.ndarray
    thresholds: np.ndarray

    @property
    def frr(self) -> np.ndarray:
        return 1.0 - self.tar

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.far.tolist(), self.tar.tolist()))


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and equally long")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both genuine and impostor samples are required")
    if n_pos + n_neg != len(labels):
        raise ValueError("labels must be 0 or 1")
    return scores, labels, n_pos, n_neg


def roc(scores, labels) -> RocCurve:
    """Sweep every distinct score as a threshold, in descending order."""
    scores, labels, n_pos, n_neg = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # Last position of each run of equal scores.
    ends = np.r_[np.nonzero(s[1:] != s[:-1])[0], len(s) - 1]
    return RocCurve(
        far=np.r_[0.0, fp[ends] / n_neg],
        tar=np.r_[0.0, tp[ends] / n_pos],
        thresholds=np.r_[np.inf, s[ends]],
    )


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    x, y = curve.far, curve.tar
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))


def eer(scores, labels) -> tuple[float, float]:
    """Equal error rate and the threshold where it occurs.

    FAR falls and FRR rises as the threshold increases. The crossing is
    located between the two adjacent sweep points where FAR - FRR changes
    sign and both rates are interpolated linearly there. The returned
    threshold is interpolated the same way (the lower point's threshold
    when the crossing lies next to the +inf endpoint).
    """
    curve = roc(scores, labels)
    far_, frr_ = curve.far, curve.frr
    diff = far_ - frr_
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return float(far_[k]), float(curve.thresholds[k])
    lam = -diff[k - 1] / (diff[k] - diff[k - 1])
    rate = far_[k - 1] + lam * (far_[k] - far_[k - 1])
    t_hi, t_lo = curve.thresholds[k - 1], curve.thresholds[k]
    threshold = t_lo if np.isinf(t_hi) else t_hi + lam * (t_lo - t_hi)
    return float(rate), float(threshold)


def rates_at(scores, labels, threshold) -> tuple[float, float]:
    """(FAR, FRR) at a given threshold; acceptance is score >= threshold."""
    scores, labels, n_pos, n_neg = _check_binary(scores, labels)
    accept = scores >= threshold
    return (
        float((accept & (labels == 0)).sum() / n_neg),
        float((~accept & (labels == 1)).sum() / n_pos),
    )


@dataclass(frozen=True)
class EvalResult:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    far: float
    frr: float
    eer: float
    eer_threshold: float
    auc: float
    roc: RocCurve = field(repr=False)
    threshold: float = 0.5
    flags: tuple[str, ...] = ()

    def metric(self, name) -> float:
        return float(getattr(self, name))

    def to_dict(self) -> dict:
        cm = self.confusion
        return {
            "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn},
            **{m: self.metric(m) for m in AVERAGED_METRICS},
            "eer_threshold": self.eer_threshold,
            "threshold": self.threshold,
            "flags": list(self.flags),
            "roc": {
                "far": self.roc.far.tolist(),
                "tar": self.roc.tar.tolist(),
                # JSON has no infinity; the first threshold is always +inf.
                "thresholds": self.roc.thresholds[1:].tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d) -> "EvalResult":
        r = d["roc"]
        return cls(
            confusion=ConfusionMatrix(**d["confusion"]),
            **{m: float(d[m]) for m in AVERAGED_METRICS},
            eer_threshold=float(d["eer_threshold"]),
            threshold=float(d["threshold"]),
            flags=tuple(d["flags"]),
            roc=RocCurve(
                far=np.array(r["far"], dtype=float),
                tar=np.array(r["tar"], dtype=float),
                thresholds=np.r_[np.inf, np.array(r["thresholds"], dtype=float)],
            ),
        )


def evaluate(scores, labels, threshold) -> EvalResult:
    """All metrics for one user's scored test set at an operating threshold."""
    scores, labels, _, _ = _check_binary(scores, labels)
    cm = confusion(scores >= threshold, labels)
    curve = roc(scores, labels)
    rate, t_eer = eer(scores, labels)
    return EvalResult(
        confusion=cm,
        accuracy=accuracy(cm),
        precision=precision(cm),
        recall=recall(cm),
        f1=f1(cm),
        far=far(cm),
        frr=frr(cm),
        eer=rate,
        eer_threshold=t_eer,
        auc=auc(curve),
        roc=curve,
        threshold=float(threshold),
        flags=flags(cm),
    )


def aggregate(results) -> dict[str, float]:
    """Unweighted mean of every averaged metric over per-user results."""
    results = list(results)
    if not results:
        return {}
    return {
        m: float(np.mean([r.metric(m) for r in results])) for m in AVERAGED_METRICS
    }
