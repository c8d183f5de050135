"""External clustering metrics and a wall-clock timing helper.

All four metrics compare a predicted labelling with ground truth through
their contingency table. The F-measure is the pairwise one (precision and
recall over co-clustered pairs) and NMI is normalised by the geometric mean
of the two entropies.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import LengthMismatch, TooFewPoints


@dataclass(frozen=True)
class Contingency:
    table: np.ndarray  # rows: predicted clusters, columns: true classes
    n: int


@dataclass(frozen=True)
class QualityReport:
    ri: float
    cp: float
    f_measure: float
    nmi: float
    runtime_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _as_labels(pred, truth) -> tuple[list, list]:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"labelings of length {pred.shape} and {truth.shape}")
    return pred.tolist(), truth.tolist()


def contingency(pred, truth) -> Contingency:
    pred, truth = _as_labels(pred, truth)
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    shape = (len(p_vals), len(t_vals))
    table = np.bincount(p_idx * shape[1] + t_idx, minlength=shape[0] * shape[1])
    return Contingency(table.reshape(shape).astype(np.int64), len(pred))


def _pairs_within(counts) -> int:
    return sum(c * (c - 1) // 2 for c in counts)


def _pair_counts(pred, truth) -> tuple[int, int, int, int]:
    """(together in both, together only in pred, together only in truth, total pairs)."""
    # sparse contingency counts; much cheaper than arrays for the many tiny
    # labelings the oracle tests feed through here
    pred, truth = _as_labels(pred, truth)
    n = len(pred)
    if n < 2:
        raise TooFewPoints("pair-counting metrics need at least two points")
    both = _pairs_within(Counter(zip(pred, truth)).values())
    in_pred = _pairs_within(Counter(pred).values())
    in_truth = _pairs_within(Counter(truth).values())
    return both, in_pred - both, in_truth - both, n * (n - 1) // 2


def rand_index(pred, truth) -> float:
    tp, fp, fn, total = _pair_counts(pred, truth)
    tn = total - tp - fp - fn
    return (tp + tn) / total


def purity(pred, truth) -> float:
    c = contingency(pred, truth)
    if c.n == 0:
        raise TooFewPoints("purity needs at least one point")
    return float(c.table.max(axis=1).sum()) / c.n


def f_measure(pred, truth) -> float:
    tp, fp, fn, _ = _pair_counts(pred, truth)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    c = contingency(pred, truth)
    if c.n == 0:
        raise TooFewPoints("nmi needs at least one point")
    n = c.n
    h_pred = _entropy(c.table.sum(axis=1), n)
    h_true = _entropy(c.table.sum(axis=0), n)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    joint = c.table / n
    outer = np.outer(c.table.sum(axis=1), c.table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return float(min(max(mi / np.sqrt(h_pred * h_true), 0.0), 1.0))


def quality(pred, truth, runtime_s: float = 0.0) -> QualityReport:
    return QualityReport(rand_index(pred, truth), purity(pred, truth),
                         f_measure(pred, truth), nmi(pred, truth), runtime_s)


def timed_run(task: Callable):
    """Run ``task()`` and return ``(result, seconds)`` on a monotonic clock."""
    start = time.perf_counter()
    result = task()
    return result, time.perf_counter() - start
