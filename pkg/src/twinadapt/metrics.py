"""Multi-class classification metrics and cross-run aggregation.

Per-class precision/recall/F1 are computed one-vs-rest from integer
confusion counts; any zero denominator yields 0 by convention.  F1 is the
harmonic mean of precision and recall, computed from counts as
2*TP / (2*TP + FP + FN) so that equal precision and recall reproduce that
value exactly in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "ClassMetrics",
    "MetricsReport",
    "AggregateReport",
    "MeanStd",
    "confusion",
    "accuracy",
    "precision_recall_f1",
    "f1_score",
    "aggregate",
    "format_mean_std",
]


@dataclass
class ConfusionMatrix:
    """Counts[i, j] = number of samples with true class i predicted as j."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion matrix counts must be non-negative")
        self.counts = counts.astype(np.int64)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true, pred, n_classes: int) -> ConfusionMatrix:
    true = np.asarray(true)
    pred = np.asarray(pred)
    if true.shape != pred.shape or true.ndim != 1:
        raise ValueError(f"label shape mismatch: {true.shape} vs {pred.shape}")
    if true.size and (
        true.min() < 0 or true.max() >= n_classes or pred.min() < 0 or pred.max() >= n_classes
    ):
        raise IndexError(f"labels out of range [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy is undefined for an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean 2pr/(p+r), 0 when both are 0.

    Factored as p * (2r / (p+r)) so f1(r, r) == r without rounding drift.
    """
    if precision + recall == 0.0:
        return 0.0
    return precision * (2.0 * recall / (precision + recall))


def precision_recall_f1(cm: ConfusionMatrix, class_id: int) -> tuple[float, float, float]:
    """One-vs-rest precision, recall, F1 for one class; 0/0 -> 0."""
    if not 0 <= class_id < cm.n_classes:
        raise IndexError(f"class {class_id} out of range [0, {cm.n_classes})")
    counts = cm.counts
    tp = int(counts[class_id, class_id])
    fp = int(counts[:, class_id].sum()) - tp
    fn = int(counts[class_id, :].sum()) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return precision, recall, f1


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    """All headline metrics for one evaluated run."""

    confusion: ConfusionMatrix
    accuracy: float
    per_class: list[ClassMetrics]
    macro_f1: float
    n_samples: int

    @classmethod
    def from_predictions(cls, true, pred, n_classes: int) -> "MetricsReport":
        cm = confusion(true, pred, n_classes)
        per_class = [
            ClassMetrics(*precision_recall_f1(cm, c)) for c in range(n_classes)
        ]
        macro = sum(m.f1 for m in per_class) / n_classes
        return cls(cm, accuracy(cm), per_class, macro, cm.total)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": [
                {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for m in self.per_class
            ],
            "confusion": self.confusion.counts.tolist(),
        }


@dataclass
class MeanStd:
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


def _mean_std(values: list[float]) -> MeanStd:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return MeanStd(mean, 0.0)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return MeanStd(mean, math.sqrt(var))


@dataclass
class AggregateReport:
    """Mean and sample (n-1) standard deviation of metrics across runs."""

    n_runs: int
    accuracy: MeanStd
    macro_f1: MeanStd
    per_class: list[dict[str, MeanStd]] = field(default_factory=list)

    @property
    def single_run(self) -> bool:
        return self.n_runs == 1

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "single_run": self.single_run,
            "accuracy": self.accuracy.to_dict(),
            "macro_f1": self.macro_f1.to_dict(),
            "per_class": [
                {k: v.to_dict() for k, v in row.items()} for row in self.per_class
            ],
        }


def aggregate(reports: list[MetricsReport]) -> AggregateReport:
    if not reports:
        raise ValueError("aggregate needs at least one report")
    n_classes = reports[0].confusion.n_classes
    if any(r.confusion.n_classes != n_classes for r in reports):
        raise ValueError("aggregate needs reports with matching class counts")
    per_class = []
    for c in range(n_classes):
        per_class.append(
            {
                "precision": _mean_std([r.per_class[c].precision for r in reports]),
                "recall": _mean_std([r.per_class[c].recall for r in reports]),
                "f1": _mean_std([r.per_class[c].f1 for r in reports]),
            }
        )
    return AggregateReport(
        n_runs=len(reports),
        accuracy=_mean_std([r.accuracy for r in reports]),
        macro_f1=_mean_std([r.macro_f1 for r in reports]),
        per_class=per_class,
    )


def format_mean_std(ms: MeanStd, percent: bool = True) -> str:
    """Render as mm.mm+/-ss.ss, in percent for accuracy-style tables."""
    scale = 100.0 if percent else 1.0
    return f"{ms.mean * scale:.2f}±{ms.std * scale:.2f}"
