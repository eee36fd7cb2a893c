"""Binary classification metrics: confusion matrix, classification report,
ROC and precision-recall curves.

Class 1 (churn) is the positive class throughout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DataError

CLASS_LABELS = ("Not Churn", "Churn")


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self):
        return self.tn + self.fp + self.fn + self.tp


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    classes: tuple  # (ClassStats for 0, ClassStats for 1)
    accuracy: float
    macro: ClassStats
    weighted: ClassStats
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "classes": {str(c): asdict(s) for c, s in enumerate(self.classes)},
            "accuracy": self.accuracy,
            "macro_avg": asdict(self.macro),
            "weighted_avg": asdict(self.weighted),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class CurvePoints:
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


def _binary_pair(y_true, y_pred):
    a = np.asarray(y_true)
    b = np.asarray(y_pred)
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise DataError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 1:
        raise DataError("need at least one pair")
    for arr, what in ((a, "y_true"), (b, "y_pred")):
        if not np.all((arr == 0) | (arr == 1)):
            raise DataError(f"{what} has non-binary entries")
    return a.astype(np.int64), b.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t, p = _binary_pair(y_true, y_pred)
    return ConfusionMatrix(
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tp=int(np.sum((t == 1) & (p == 1))),
    )


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def f1_score(precision, recall):
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def aggregate(per_class):
    """Macro and support-weighted means of per-class (precision, recall, f1).

    ``per_class`` is a sequence of ``ClassStats``; returns ``(macro, weighted)``.
    """
    k = len(per_class)
    total = sum(s.support for s in per_class)
    macro = ClassStats(
        sum(s.precision for s in per_class) / k,
        sum(s.recall for s in per_class) / k,
        sum(s.f1 for s in per_class) / k,
        total,
    )
    weighted = ClassStats(
        _ratio(sum(s.precision * s.support for s in per_class), total),
        _ratio(sum(s.recall * s.support for s in per_class), total),
        _ratio(sum(s.f1 * s.support for s in per_class), total),
        total,
    )
    return macro, weighted


def classification_report(y_true, y_pred) -> ClassificationReport:
    cm = confusion(y_true, y_pred)
    # (tp, fp, fn) as seen from each class
    views = ((cm.tn, cm.fn, cm.fp), (cm.tp, cm.fp, cm.fn))
    stats, warnings = [], []
    for c, (tp, fp, fn) in enumerate(views):
        if tp + fp == 0:
            warnings.append(f"precision of class {c} undefined (no predictions); set to 0")
        if tp + fn == 0:
            warnings.append(f"recall of class {c} undefined (no true samples); set to 0")
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        stats.append(ClassStats(p, r, f1_score(p, r), tp + fn))
    macro, weighted = aggregate(stats)
    acc = (cm.tp + cm.tn) / cm.total
    return ClassificationReport(tuple(stats), acc, macro, weighted, tuple(warnings))


def _check_scores(y_true, scores):
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1 or s.shape != y.shape:
        raise DataError(f"length mismatch: {y.shape} vs {s.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("y_true has non-binary entries")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    return y.astype(np.int64), s


def _sweep(y, s):
    """Cumulative (tp, fp) after each block of tied scores, scores descending."""
    order = np.argsort(-s, kind="stable")
    ss = s[order]
    ys = y[order]
    ends = np.r_[np.nonzero(ss[1:] != ss[:-1])[0], ss.size - 1]
    tps = np.cumsum(ys)[ends]
    fps = (ends + 1) - tps
    return tps.astype(np.float64), fps.astype(np.float64), ss[ends]


def roc_curve(y_true, scores) -> CurvePoints:
    """FPR/TPR at every distinct score threshold, from (0, 0) to (1, 1).

    Tied scores form one step, so the curve cuts diagonally through ties.
    """
    y, s = _check_scores(y_true, scores)
    P = int(y.sum())
    N = y.size - P
    if P == 0 or N == 0:
        raise DataError("ROC AUC is undefined when y_true has a single class")
    tps, fps, thr = _sweep(y, s)
    tpr = np.r_[0.0, tps / P]
    fpr = np.r_[0.0, fps / N]
    thresholds = np.r_[np.inf, thr]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return CurvePoints(fpr, tpr, thresholds, auc)


def auc_concordance(y_true, scores):
    """Probability a random positive outscores a random negative, ties half."""
    y, s = _check_scores(y_true, scores)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC is undefined when y_true has a single class")
    diff = pos[:, None] - neg[None, :]
    return float((np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / (pos.size * neg.size))


def pr_curve(y_true, scores) -> CurvePoints:
    """Recall/precision at every distinct score threshold, descending.

    The first point is the anchor ``(0, precision of the top-scored block)``
    with threshold ``+inf``. ``auc`` is the step-wise average precision.
    """
    y, s = _check_scores(y_true, scores)
    P = int(y.sum())
    if P == 0:
        raise DataError("precision-recall curve needs at least one positive")
    tps, fps, thr = _sweep(y, s)
    precision = tps / (tps + fps)
    recall = tps / P
    x = np.r_[0.0, recall]
    yy = np.r_[precision[0], precision]
    ap = float(np.sum((x[1:] - x[:-1]) * yy[1:]))
    return CurvePoints(x, yy, np.r_[np.inf, thr], ap)


def render_number(value, places=2):
    """Half-up rounding of the shortest decimal repr, e.g. 0.725 -> '0.73'."""
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def render_report(report: ClassificationReport, places=2):
    """Plain-text table laid out like a classification report."""
    head = f"{'Description':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>9}"
    lines = [head]

    def row(label, s):
        return (
            f"{label:<14}{render_number(s.precision, places):>10}"
            f"{render_number(s.recall, places):>10}{render_number(s.f1, places):>10}{s.support:>9}"
        )

    for label, s in zip(CLASS_LABELS, report.classes):
        lines.append(row(label, s))
    total = report.macro.support
    lines.append(f"{'Accuracy':<14}{'':>10}{'':>10}{render_number(report.accuracy, places):>10}{total:>9}")
    lines.append(row("Macro avg.", report.macro))
    lines.append(row("Weighted avg.", report.weighted))
    return "\n".join(lines) + "\n"
