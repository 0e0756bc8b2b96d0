"""Clustering objective and external validation scores (ARI, NMI)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .centers import sq_dists


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int


def contingency(pred, truth) -> ContingencyTable:
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    counts = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(counts, (p, t), 1)
    return ContingencyTable(counts, counts.sum(axis=1), counts.sum(axis=0), int(pred.size))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def _same_partition(tab: ContingencyTable) -> bool:
    nz = tab.counts > 0
    return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def ari(pred, truth) -> float:
    """Adjusted Rand index (Hubert-Arabie), 1.0 for identical partitions."""
    tab = contingency(pred, truth)
    if _same_partition(tab):
        return 1.0
    index = float(_comb2(tab.counts).sum())
    sum_a = float(_comb2(tab.row_sums).sum())
    sum_b = float(_comb2(tab.col_sums).sum())
    expected = sum_a * sum_b / float(_comb2(tab.n))
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0.0:
        return 0.0
    return (index - expected) / denom


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """I(pred; truth) / sqrt(H(pred) H(truth)), natural logs, 0/0 -> 0."""
    tab = contingency(pred, truth)
    if _same_partition(tab):
        return 1.0
    n = tab.n
    h_p = _entropy(tab.row_sums, n)
    h_t = _entropy(tab.col_sums, n)
    if h_p == 0.0 or h_t == 0.0:
        return 0.0
    i, j = np.nonzero(tab.counts)
    nij = tab.counts[i, j].astype(np.float64)
    mi = float((nij / n * np.log(nij * n / (tab.row_sums[i] * tab.col_sums[j]))).sum())
    return float(np.clip(mi / np.sqrt(h_p * h_t), 0.0, 1.0))


def objective(kern, centers, subset=None) -> float:
    """f_A(C): mean over ``subset`` of the squared distance to the nearest center."""
    if len(centers) < 1:
        raise ValueError("need at least one center")
    subset = np.arange(kern.n) if subset is None else np.asarray(subset, dtype=np.intp)
    if subset.size == 0:
        raise ValueError("objective over an empty subset")
    return float(sq_dists(kern, centers, subset).min(axis=1).mean())
