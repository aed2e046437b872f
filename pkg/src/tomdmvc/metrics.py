"""External clustering measures: pairwise F/P/R, NMI, adjusted Rand, accuracy."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ValidationError

METRIC_NAMES = ("f_score", "precision", "recall", "nmi", "ar", "acc")


@dataclass
class MetricReport:
    f_score: float
    precision: float
    recall: float
    nmi: float
    ar: float
    acc: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def contingency(pred, truth) -> np.ndarray:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValidationError(f"label vectors differ: {pred.shape} vs {truth.shape}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def _ratio(num, den):
    return num / den if den else 0.0


def pair_counting_prf(pred, truth) -> tuple[float, float, float]:
    """Pairwise ``(F, precision, recall)``; a pair is positive when co-clustered in ``pred``."""
    table = contingency(pred, truth)
    if table.sum() < 2:
        raise ValidationError("pair counting needs at least two samples")
    tp = _pairs(table)
    pred_pos = _pairs(table.sum(axis=1))
    true_pos = _pairs(table.sum(axis=0))
    precision = _ratio(tp, pred_pos)
    recall = _ratio(tp, true_pos)
    f = _ratio(2 * precision * recall, precision + recall)
    return f, precision, recall


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth, average: str = "geometric") -> float:
    """Mutual information over ``sqrt(H(pred) H(truth))`` (or the arithmetic mean)."""
    table = contingency(pred, truth)
    n = table.sum()
    rows, cols = table.sum(axis=1), table.sum(axis=0)
    nz = table > 0
    mi = float(np.sum(table[nz] / n * np.log(table[nz] * n / np.outer(rows, cols)[nz])))
    h_p, h_t = _entropy(rows, n), _entropy(cols, n)
    if average == "geometric":
        denom = np.sqrt(h_p * h_t)
    elif average == "arithmetic":
        denom = (h_p + h_t) / 2
    else:
        raise ValueError(f"unknown NMI normalization {average!r}")
    if denom == 0:
        # both single-cluster (identical) -> 1; otherwise no shared information
        return 1.0 if table.shape == (1, 1) else 0.0
    return float(min(max(mi / denom, 0.0), 1.0))


def adjusted_rand(pred, truth) -> float:
    table = contingency(pred, truth)
    n = int(table.sum())
    if n < 2:
        raise ValidationError("adjusted Rand needs at least two samples")
    index = _pairs(table)
    a = _pairs(table.sum(axis=1))
    b = _pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = a * b / total
    max_index = (a + b) / 2
    if max_index == expected:
        return 1.0 if _same_partition(table) else 0.0
    return float((index - expected) / (max_index - expected))


def _same_partition(table) -> bool:
    return table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]


def accuracy(pred, truth) -> float:
    """Best fraction of matched labels under a one-to-one cluster mapping."""
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def evaluate(pred, truth) -> MetricReport:
    f, p, r = pair_counting_prf(pred, truth)
    return MetricReport(
        f_score=f, precision=p, recall=r,
        nmi=nmi(pred, truth), ar=adjusted_rand(pred, truth), acc=accuracy(pred, truth),
    )
