"""Classification metrics and the paired significance test used by reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Two-sided t critical values at alpha = 0.05 for df = 1..30. Degrees of
# freedom above 30 clamp to the df = 30 entry (slightly conservative).
_T_CRITICAL_05 = (
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    f1: float
    precision: float
    recall: float
    accuracy: float
    support_negative: int
    support_positive: int

    def as_dict(self) -> dict:
        return {
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "support_negative": self.support_negative,
            "support_positive": self.support_positive,
        }


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    significant_at_0_05: bool


def confusion(predictions, labels) -> ConfusionMatrix:
    """Standard confusion counts with class 1 as positive."""
    pred = np.asarray(predictions, dtype=np.int64)
    lab = np.asarray(labels, dtype=np.int64)
    if pred.shape != lab.shape or pred.ndim != 1:
        raise ValueError("confusion: predictions and labels must be equal-length vectors")
    if pred.size == 0:
        raise ValueError("confusion: empty input")
    for arr, name in ((pred, "predictions"), (lab, "labels")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"confusion: {name} must be 0 or 1")
    return ConfusionMatrix(
        tp=int(((pred == 1) & (lab == 1)).sum()),
        fp=int(((pred == 1) & (lab == 0)).sum()),
        tn=int(((pred == 0) & (lab == 0)).sum()),
        fn=int(((pred == 0) & (lab == 1)).sum()),
    )


def metrics_from(cm: ConfusionMatrix) -> MetricsReport:
    """Precision/recall/F1/accuracy; zero denominators yield 0."""
    if cm.total <= 0:
        raise ValueError("metrics_from: empty confusion matrix")
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0.0
        else 0.0
    )
    return MetricsReport(
        f1=f1,
        precision=precision,
        recall=recall,
        accuracy=(cm.tp + cm.tn) / cm.total,
        support_negative=cm.tn + cm.fp,
        support_positive=cm.tp + cm.fn,
    )


def evaluate(predictions, labels) -> MetricsReport:
    return metrics_from(confusion(predictions, labels))


def paired_t_test(scores_a, scores_b) -> TTestResult:
    """Two-sided paired t-test on score differences at alpha = 0.05.

    Zero-variance differences are special-cased: an all-zero difference
    vector gives t = 0 (not significant); a constant nonzero difference
    gives an infinite t statistic (significant).
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_t_test: score lists must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("paired_t_test: need at least 2 paired scores")
    d = a - b
    df = n - 1
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, df, False)
        return TTestResult(math.copysign(math.inf, mean), df, True)
    t = mean / (sd / math.sqrt(n))
    critical = _T_CRITICAL_05[min(df, len(_T_CRITICAL_05)) - 1]
    return TTestResult(t, df, abs(t) > critical)
