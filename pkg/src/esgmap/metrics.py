"""Binary-classification evaluation: confusion counts, per-class and
support-weighted precision/recall/F1, and binary cross-entropy.

The weighted average is the primary output because the benchmark's test set
is imbalanced; macro and per-class values are reported alongside for
transparency. Any metric term with a zero denominator (or a class with zero
support) is defined as 0 — this is the common weighted-average convention and
it changes the value of degenerate reports, so it is applied consistently
everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

BCE_EPS = 1e-12


def _check_labels(name: str, values: Sequence[int]) -> None:
    for v in values:
        if v not in (0, 1):
            raise ValueError(f"{name} must contain only 0/1 labels, got {v!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with class 1 as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    if not y_true:
        raise ValueError("cannot score an empty input")
    _check_labels("y_true", y_true)
    _check_labels("y_pred", y_pred)
    tp = fp = fn = tn = 0
    for t, p in zip(y_true, y_pred):
        if t == 1 and p == 1:
            tp += 1
        elif t == 0 and p == 1:
            fp += 1
        elif t == 1 and p == 0:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class MetricsReport:
    confusion: ConfusionMatrix
    support0: int
    support1: int
    precision0: float
    recall0: float
    f1_0: float
    precision1: float
    recall1: float
    f1_1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    bce_loss: float | None = None

    def to_dict(self) -> dict:
        d = {
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "fn": self.confusion.fn,
                "tn": self.confusion.tn,
            },
            "support0": self.support0,
            "support1": self.support1,
            "class0": {"precision": self.precision0, "recall": self.recall0, "f1": self.f1_0},
            "class1": {"precision": self.precision1, "recall": self.recall1, "f1": self.f1_1},
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
        }
        if self.bce_loss is not None:
            d["bce_loss"] = self.bce_loss
        return d


def weighted_metrics(y_true: Sequence[int], y_pred: Sequence[int],
                     y_prob: Sequence[float] | None = None) -> MetricsReport:
    """Per-class P/R/F1 (each class treated as positive in turn) plus
    support-weighted and macro averages; BCE included when probabilities
    are supplied."""
    cm = confusion(y_true, y_pred)
    n1 = cm.tp + cm.fn
    n0 = cm.tn + cm.fp
    p1, r1, f1 = _prf(cm.tp, cm.fp, cm.fn)
    # Class 0 as positive: its TP are the true negatives above.
    p0, r0, f0 = _prf(cm.tn, cm.fn, cm.fp)
    n = n0 + n1
    return MetricsReport(
        confusion=cm,
        support0=n0,
        support1=n1,
        precision0=p0,
        recall0=r0,
        f1_0=f0,
        precision1=p1,
        recall1=r1,
        f1_1=f1,
        weighted_precision=(n0 * p0 + n1 * p1) / n,
        weighted_recall=(n0 * r0 + n1 * r1) / n,
        weighted_f1=(n0 * f0 + n1 * f1) / n,
        macro_precision=(p0 + p1) / 2,
        macro_recall=(r0 + r1) / 2,
        macro_f1=(f0 + f1) / 2,
        bce_loss=bce_loss(y_true, y_prob) if y_prob is not None else None,
    )


def bce_loss(y_true: Sequence[int], y_prob: Sequence[float]) -> float:
    """Mean binary cross-entropy, -(1/N) * sum[y*log(p) + (1-y)*log(1-p)].

    Probabilities are clamped to [eps, 1-eps] with eps=1e-12 before the log,
    so a perfect predictor scores ~1e-12 rather than exactly 0.
    """
    if len(y_true) != len(y_prob):
        raise ValueError(f"length mismatch: {len(y_true)} labels vs {len(y_prob)} probabilities")
    if not y_true:
        raise ValueError("cannot score an empty input")
    _check_labels("y_true", y_true)
    total = 0.0
    for y, p in zip(y_true, y_prob):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p!r} outside [0, 1]")
        p = min(max(p, BCE_EPS), 1.0 - BCE_EPS)
        total += y * math.log(p) + (1 - y) * math.log(1.0 - p)
    return -total / len(y_true)


def render_metrics_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Plain-text table (Model / Precision / Recall / F1-Score), weighted
    values at four decimals."""
    header = ("Model", "Precision", "Recall", "F1-Score")
    body = [
        (name, f"{r.weighted_precision:.4f}", f"{r.weighted_recall:.4f}", f"{r.weighted_f1:.4f}")
        for name, r in rows
    ]
    widths = [max(len(col[i]) for col in [header, *body]) for i in range(4)]
    lines = []
    for row in [header, *body]:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
