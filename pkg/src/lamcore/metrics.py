"""Confusion-matrix based segmentation metrics: per-class IoU and F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError, UndefinedMetricError
from .tensor_core import IGNORE_ID, LabelMap


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C integer counts; rows index ground truth, columns prediction."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64, copy=True)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ShapeMismatchError(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise InvalidInputError("confusion counts must be non-negative")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_count != other.class_count:
            raise ShapeMismatchError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)


def confusion(pred: LabelMap, gt: LabelMap, class_count: int) -> ConfusionMatrix:
    """Count (gt, pred) pairs over non-ignore ground-truth pixels.

    Predictions must not contain the ignore sentinel.
    """
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} does not match truth {gt.shape}")
    if (pred.ids == IGNORE_ID).any():
        raise InvalidInputError("prediction contains the ignore sentinel")
    pred.validate_for_classes(class_count)
    gt.validate_for_classes(class_count)
    valid = gt.ids != IGNORE_ID
    g = gt.ids[valid].astype(np.int64)
    p = pred.ids[valid].astype(np.int64)
    counts = np.bincount(class_count * g + p, minlength=class_count * class_count)
    return ConfusionMatrix(counts.reshape(class_count, class_count))


def _tp_fp_fn(m: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tp = np.diag(m.counts).astype(np.float64)
    fp = m.counts.sum(axis=0) - tp
    fn = m.counts.sum(axis=1) - tp
    return tp, fp, fn


def miou(m: ConfusionMatrix) -> tuple[list[float], float]:
    """Per-class IoU and its mean over classes with non-zero union.

    Classes absent from both prediction and ground truth get NaN and are
    excluded from the mean; if every class is absent the metric is undefined.
    """
    tp, fp, fn = _tp_fp_fn(m)
    union = tp + fp + fn
    defined = union > 0
    if not defined.any():
        raise UndefinedMetricError("IoU undefined: all classes have zero union")
    iou = np.where(defined, tp / np.where(defined, union, 1.0), np.nan)
    return iou.tolist(), float(iou[defined].mean())


def mf1(m: ConfusionMatrix) -> tuple[list[float], float]:
    """Per-class F1 = 2*TP / (2*TP + FP + FN), exclusion rule as in miou."""
    tp, fp, fn = _tp_fp_fn(m)
    denom = 2.0 * tp + fp + fn
    defined = denom > 0
    if not defined.any():
        raise UndefinedMetricError("F1 undefined: all classes have zero union")
    f1 = np.where(defined, 2.0 * tp / np.where(defined, denom, 1.0), np.nan)
    return f1.tolist(), float(f1[defined].mean())


def metrics_report_csv(m: ConfusionMatrix) -> str:
    """CSV report: one class_id,iou,f1 row per class plus a mean row."""
    iou, mean_iou = miou(m)
    f1, mean_f1 = mf1(m)
    lines = ["class_id,iou,f1"]
    for c in range(m.class_count):
        lines.append(f"{c},{iou[c]!r},{f1[c]!r}")
    lines.append(f"mean,{mean_iou!r},{mean_f1!r}")
    return "\n".join(lines) + "\n"
