"""Confusion-matrix metrics and ROC/AUC for binary classifiers."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    sensitivity: float
    auc: float | None
    roc_points: list[tuple[float, float]] = field(default_factory=list)
    loss: float | None = None

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self, with_roc=False) -> dict:
        d = asdict(self)
        if not with_roc:
            d.pop("roc_points")
        else:
            d["roc_points"] = [list(p) for p in self.roc_points]
        return d


def _ratio(a, b):
    return a / b if b else 0.0


def confusion(scores, labels, threshold=0.5):
    """(tp, fp, tn, fn) with ``score >= threshold`` counted positive."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pred = s >= threshold
    return (int((pred & y).sum()), int((pred & ~y).sum()),
            int((~pred & ~y).sum()), int((~pred & y).sum()))


def roc_auc(scores, labels):
    """Mann-Whitney AUC (ties count one half) and the swept ROC curve.

    ROC points run from (0, 0) to (1, 1), one per distinct score threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise DomainError("ROC/AUC needs at least one positive and one negative label")

    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    not_above = np.searchsorted(neg_sorted, pos, side="right")
    wins = below.sum() + 0.5 * (not_above - below).sum()
    auc = float(wins / (pos.size * neg.size))

    order = np.argsort(-s, kind="stable")
    s_desc, y_desc = s[order], y[order]
    tps = np.cumsum(y_desc)
    fps = np.cumsum(1 - y_desc)
    last = np.r_[np.flatnonzero(np.diff(s_desc) != 0), s_desc.size - 1]
    tpr = np.r_[0.0, tps[last] / pos.size]
    fpr = np.r_[0.0, fps[last] / neg.size]
    return auc, list(zip(fpr.tolist(), tpr.tolist()))


def trapezoid_area(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2))


def report(scores, labels, threshold=0.5, loss=None) -> MetricsReport:
    tp, fp, tn, fn = confusion(scores, labels, threshold)
    precision, recall = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    try:
        auc, roc = roc_auc(scores, labels)
    except DomainError:
        auc, roc = None, []
    return MetricsReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        accuracy=_ratio(tp + tn, tp + fp + tn + fn),
        precision=precision, recall=recall, f1=f1,
        specificity=_ratio(tn, tn + fp), sensitivity=recall,
        auc=auc, roc_points=roc, loss=loss,
    )


def write_roc_csv(points, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in points:
            w.writerow([repr(float(fpr)), repr(float(tpr))])
