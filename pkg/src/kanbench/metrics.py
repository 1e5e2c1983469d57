"""Confusion-matrix metrics.

Binary tasks report macro (unweighted) F1/precision/recall plus FPR/FNR for
the designated positive class; multiclass tasks report support-weighted
averages. All values are percentages.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .autodiff import UsageError

FIELDS = ("accuracy", "f1", "precision", "recall", "fpr", "fnr")


class DegenerateClassWarning(UserWarning):
    """A per-class metric had an empty denominator and was set to 0."""


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    f1: float
    precision: float
    recall: float
    fpr: float | None
    fnr: float | None
    averaging_mode: str

    def to_dict(self) -> dict:
        return asdict(self)


def predict(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(logits), axis=1)


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise UsageError(f"length mismatch: {y_true.size} true vs {y_pred.size} predicted labels")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise UsageError(f"{name} has labels outside [0, {n_classes})")
    flat = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    return ConfusionMatrix(flat.reshape(n_classes, n_classes))


def _safe_ratio(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    empty = den == 0
    if empty.any():
        warnings.warn(f"{what}: empty denominator for class(es) {np.flatnonzero(empty).tolist()}, "
                      "set to 0", DegenerateClassWarning, stacklevel=3)
    return np.divide(num, den, out=np.zeros_like(num), where=~empty)


def compute_metrics(cm: ConfusionMatrix, task: str, positive_class: int | None = None) -> MetricsRecord:
    counts = np.asarray(cm.counts, dtype=np.int64)
    total = counts.sum()
    if counts.size == 0 or total == 0:
        raise UsageError("cannot compute metrics from an empty confusion matrix")
    if task not in ("binary", "multiclass"):
        raise UsageError(f"task must be 'binary' or 'multiclass', got {task!r}")
    tp = np.diag(counts)
    pred_tot = counts.sum(axis=0)
    true_tot = counts.sum(axis=1)
    precision = _safe_ratio(tp, pred_tot, "precision")
    recall = _safe_ratio(tp, true_tot, "recall")
    f1 = _safe_ratio(2 * precision * recall, precision + recall, "f1")
    accuracy = tp.sum() / total

    if task == "binary":
        if counts.shape != (2, 2):
            raise UsageError(f"binary task needs a 2x2 matrix, got {counts.shape}")
        if positive_class not in (0, 1):
            raise UsageError(f"binary task needs positive_class in {{0, 1}}, got {positive_class}")
        pos, neg = positive_class, 1 - positive_class
        tp_, fn_ = counts[pos, pos], counts[pos, neg]
        fp_, tn_ = counts[neg, pos], counts[neg, neg]
        fpr = float(_safe_ratio(fp_, fp_ + tn_, "fpr")) * 100.0
        fnr = float(_safe_ratio(fn_, fn_ + tp_, "fnr")) * 100.0
        return MetricsRecord(
            accuracy=float(accuracy) * 100.0,
            f1=float(f1.mean()) * 100.0,
            precision=float(precision.mean()) * 100.0,
            recall=float(recall.mean()) * 100.0,
            fpr=fpr,
            fnr=fnr,
            averaging_mode="macro",
        )

    weights = true_tot / total
    return MetricsRecord(
        accuracy=float(accuracy) * 100.0,
        f1=float(f1 @ weights) * 100.0,
        precision=float(precision @ weights) * 100.0,
        recall=float(recall @ weights) * 100.0,
        fpr=None,
        fnr=None,
        averaging_mode="weighted",
    )


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    n: int
    std_defined: bool = True  # False when n == 1 and std was reported as 0


def mean_std(values: Sequence[float]) -> Summary:
    vals = [float(v) for v in values]
    if not vals:
        raise UsageError("cannot summarize an empty sequence")
    n = len(vals)
    mean = math.fsum(vals) / n
    if n == 1:
        return Summary(mean, 0.0, 1, std_defined=False)
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return Summary(mean, math.sqrt(var), n)


def aggregate(records: Sequence[MetricsRecord]) -> dict[str, Summary]:
    """Mean and sample (n-1) standard deviation of every metric field."""
    if not records:
        raise UsageError("aggregate() needs at least one record")
    modes = {r.averaging_mode for r in records}
    if len(modes) != 1:
        raise UsageError(f"records mix averaging modes {sorted(modes)}")
    out = {}
    for name in FIELDS:
        vals = [getattr(r, name) for r in records]
        if any(v is None for v in vals):
            continue
        out[name] = mean_std(vals)
    return out
