"""Clustering metrics and the zero-shot assignment baseline.

Accuracy solves the optimal one-to-one cluster-to-class matching on the
confusion matrix (Hungarian assignment on negated counts), so it is
invariant to how either side labels its clusters.  Mutual information is
normalized by the arithmetic mean of the two entropies.  The adjusted Rand
index is computed from exact integer pair counts, so it matches any
pair-counting reference bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment


def _check_labels(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.ndim != 1 or truth.ndim != 1:
        raise ValueError("label vectors must be 1-D")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} truths")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("labels must be non-negative")
    return pred, truth


def confusion_matrix(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Count matrix with one row per predicted cluster, one column per true class."""
    pred, truth = _check_labels(pred, truth)
    k_pred = int(pred.max()) + 1
    k_true = int(truth.max()) + 1
    flat = np.bincount(pred * k_true + truth, minlength=k_pred * k_true)
    return flat.reshape(k_pred, k_true)


def accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of samples matched under the best cluster-to-class assignment.

    The confusion matrix is zero-padded to square when the two sides use a
    different number of clusters, which leaves surplus clusters unmatched
    at zero cost.
    """
    conf = confusion_matrix(pred, truth)
    k = max(conf.shape)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: conf.shape[0], : conf.shape[1]] = conf
    rows, cols = linear_sum_assignment(-padded)
    matched = int(padded[rows, cols].sum())
    return matched / int(conf.sum())


def nmi(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mutual information over the arithmetic mean of the marginal entropies.

    Natural logs internally; the normalization cancels the base.  Two
    constant labelings describe the same single-cluster partition and
    score 1; one constant side against a varied one scores 0.
    """
    conf = confusion_matrix(pred, truth)
    total = int(conf.sum())
    rows = conf.sum(axis=1)
    cols = conf.sum(axis=0)
    log_total = math.log(total)
    h_pred = math.fsum(
        (int(a) / total) * (log_total - math.log(int(a))) for a in rows if a > 0
    )
    h_true = math.fsum(
        (int(b) / total) * (log_total - math.log(int(b))) for b in cols if b > 0
    )
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    mean_entropy = 0.5 * (h_pred + h_true)
    if mean_entropy == 0.0:
        return 0.0
    mutual = math.fsum(
        (int(n) / total)
        * (math.log(int(n)) + log_total - math.log(int(rows[i])) - math.log(int(cols[j])))
        for i in range(conf.shape[0])
        for j in range(conf.shape[1])
        if (n := conf[i, j]) > 0
    )
    return min(max(mutual / mean_entropy, 0.0), 1.0)


def _pairs(n: int) -> int:
    return n * (n - 1) // 2


def ari(pred: np.ndarray, truth: np.ndarray) -> float:
    """Adjusted Rand index from exact integer pair counts.

    With s11 the same-pair agreements, a/b the within-side pair totals and
    T the total pair count, the value is 2(s11*T - a*b) / (T(a+b) - 2ab);
    a zero denominator means both partitions are trivial and identical.
    """
    conf = confusion_matrix(pred, truth)
    total_pairs = _pairs(int(conf.sum()))
    same_both = sum(_pairs(int(n)) for n in conf.ravel())
    same_pred = sum(_pairs(int(a)) for a in conf.sum(axis=1))
    same_true = sum(_pairs(int(b)) for b in conf.sum(axis=0))
    numerator = 2 * (same_both * total_pairs - same_pred * same_true)
    denominator = total_pairs * (same_pred + same_true) - 2 * same_pred * same_true
    if denominator == 0:
        return 1.0
    return numerator / denominator


def zero_shot_assign(
    feats: np.ndarray, class_anchors: np.ndarray, tau: float = 0.04
) -> np.ndarray:
    """Nearest-anchor assignment: label_i = argmax_k anchors_k . feats_i.

    The softmax over anchor similarities is monotone in the logit, so the
    argmax of raw similarities is the argmax of the softmax at any
    temperature; ties resolve to the smaller class index.
    """
    feats = np.asarray(feats, dtype=np.float64)
    class_anchors = np.asarray(class_anchors, dtype=np.float64)
    if feats.ndim != 2 or class_anchors.ndim != 2:
        raise ValueError("feats and class_anchors must be 2-D")
    if feats.shape[1] != class_anchors.shape[1]:
        raise ValueError(
            f"dimension mismatch: features are {feats.shape[1]}-d, "
            f"anchors are {class_anchors.shape[1]}-d"
        )
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return np.argmax(feats @ class_anchors.T, axis=1).astype(np.int64)


@dataclass
class MetricReport:
    acc: float
    nmi: float
    ari: float
    confusion: np.ndarray

    def to_kv(self) -> str:
        return f"acc={self.acc:.6f}\nnmi={self.nmi:.6f}\nari={self.ari:.6f}\n"

    def to_csv_row(self) -> str:
        return f"{self.acc:.6f},{self.nmi:.6f},{self.ari:.6f}"

    def write(self, kv_path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(kv_path).write_text(self.to_kv())
        if csv_path is not None:
            Path(csv_path).write_text("acc,nmi,ari\n" + self.to_csv_row() + "\n")


def evaluate(pred: np.ndarray, truth: np.ndarray) -> MetricReport:
    return MetricReport(
        acc=accuracy(pred, truth),
        nmi=nmi(pred, truth),
        ari=ari(pred, truth),
        confusion=confusion_matrix(pred, truth),
    )
