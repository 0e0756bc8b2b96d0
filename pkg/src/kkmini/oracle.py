"""Brute-force references for checking the solvers.

These track centers as explicit coefficient vectors over the whole dataset
and recompute every inner product from the full Gram matrix, so they are
O(n^2) per query and meant for small instances and paired diagnostic runs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .centers import SparseCenter


@dataclass
class DenseCenter:
    weights: np.ndarray

    @classmethod
    def from_sparse(cls, c: SparseCenter, n: int) -> "DenseCenter":
        return cls(c.dense(n))

    def to_sparse(self) -> SparseCenter:
        idx = np.flatnonzero(self.weights)
        return SparseCenter(idx, self.weights[idx])


def dense_ips(gram: np.ndarray, centers: list[DenseCenter]):
    """ip[x, j] = <phi(x), C_j> and cc[j] = <C_j, C_j> from explicit weights."""
    w = np.column_stack([c.weights for c in centers])
    ip = gram @ w
    cc = np.einsum("ij,ij->j", w, ip)
    return ip, cc


def dense_track_step(gram, centers: list[DenseCenter], batch, alphas_fn):
    """One mini-batch update on explicit weight vectors.

    Assignment uses brute-force distances; ``alphas_fn(counts)`` gives the
    learning rates. Returns (labels, counts, alphas) and mutates ``centers``.
    """
    batch = np.asarray(batch, dtype=np.intp)
    n, k = gram.shape[0], len(centers)
    dist = np.empty((batch.size, k))
    for j, c in enumerate(centers):
        cc = c.weights @ gram @ c.weights
        dist[:, j] = np.diag(gram)[batch] - 2.0 * (gram[batch] @ c.weights) + cc
    labels = np.argmin(dist, axis=1)
    counts = np.bincount(labels, minlength=k)
    alphas = alphas_fn(counts)
    for j in np.flatnonzero(counts):
        cm = np.zeros(n)
        np.add.at(cm, batch[labels == j], 1.0 / counts[j])
        a = alphas[j]
        centers[j].weights = (1.0 - a) * centers[j].weights + a * cm
    return labels, counts, alphas


def replay_update(centers: list[DenseCenter], batch, labels, alphas) -> None:
    """Untruncated update driven by someone else's batch partition."""
    n = centers[0].weights.size
    for j in np.flatnonzero(np.bincount(labels, minlength=len(centers))):
        members = batch[labels == j]
        cm = np.zeros(n)
        np.add.at(cm, members, 1.0 / members.size)
        a = alphas[j]
        centers[j].weights = (1.0 - a) * centers[j].weights + a * cm


def center_gap(kern, c_full, c_trunc) -> float:
    """||C - C_hat|| in feature space for two centers given as SparseCenter,
    DenseCenter or TruncatedCenter (the latter is materialized)."""
    n = kern.n
    a = _dense(c_full, n)
    b = _dense(c_trunc, n)
    d = a - b
    support = np.flatnonzero(d)
    if support.size == 0:
        return 0.0
    sq = float(d[support] @ kern.block(support, support) @ d[support])
    return math.sqrt(max(sq, 0.0))


def _dense(c, n):
    if isinstance(c, DenseCenter):
        return c.weights
    if isinstance(c, SparseCenter):
        return c.dense(n)
    if hasattr(c, "materialize"):
        return c.materialize().dense(n)
    raise TypeError(f"cannot compare center of type {type(c).__name__}")


class PairedReplay:
    """Shadows a truncated run with exact untruncated centers.

    Use ``replay`` as the ``callback`` of :func:`kkmini.truncated.truncated_fit`;
    after each step it applies the same partition and learning rates to dense
    centers and records the largest center gap.
    """

    def __init__(self, kern, init: list[SparseCenter]):
        self.kern = kern
        self.centers = [DenseCenter.from_sparse(c, kern.n) for c in init]
        self.expected_iteration = 1
        self.max_gaps: list[float] = []

    def replay(self, trunc_centers, step, iteration) -> None:
        if iteration != self.expected_iteration or len(trunc_centers) != len(self.centers):
            raise ValueError("paired replay received an out-of-sequence step")
        self.expected_iteration += 1
        replay_update(self.centers, step.batch, step.labels, step.alphas)
        self.max_gaps.append(max(center_gap(self.kern, d, t)
                                 for d, t in zip(self.centers, trunc_centers)))

    __call__ = replay


def exhaustive_assign(kern, centers: list[SparseCenter], points) -> np.ndarray:
    """Nearest center by explicit double loops over member pairs."""
    out = []
    for x in np.asarray(points, dtype=np.intp):
        best, best_j = math.inf, 0
        for j, c in enumerate(centers):
            ip = sum(w * kern.block([x], [p])[0, 0] for p, w in zip(c.indices, c.weights))
            cc = sum(wp * wq * kern.block([p], [q])[0, 0]
                     for p, wp in zip(c.indices, c.weights)
                     for q, wq in zip(c.indices, c.weights))
            d = kern.diag([x])[0] - 2.0 * ip + cc
            if d < best:
                best, best_j = d, j
        out.append(best_j)
    return np.array(out, dtype=np.intp)


def brute_objective(kern, centers: list[SparseCenter], subset) -> float:
    g = kern.block(np.arange(kern.n), np.arange(kern.n))
    total = 0.0
    for x in subset:
        best = math.inf
        for c in centers:
            d = g[x, x]
            for p, wp in zip(c.indices, c.weights):
                d -= 2.0 * wp * g[x, p]
                for q, wq in zip(c.indices, c.weights):
                    d += wp * wq * g[p, q]
            best = min(best, d)
        total += best
    return total / len(subset)


MAX_EXHAUSTIVE_N = 12
MAX_EXHAUSTIVE_K = 3


def exhaustive_opt(kern, k: int):
    """Best partition over all k^n labelings, centers at cluster means.

    Returns (labels, cost) with cost = f_X. Only for n <= 12, k <= 3.
    """
    n = kern.n
    if n > MAX_EXHAUSTIVE_N or k > MAX_EXHAUSTIVE_K or k < 1:
        raise ValueError(f"exhaustive search limited to n <= {MAX_EXHAUSTIVE_N}, "
                         f"1 <= k <= {MAX_EXHAUSTIVE_K}")
    g = kern.block(np.arange(n), np.arange(n))
    trace = float(np.trace(g))
    best_cost, best_labels = math.inf, None
    all_labels = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int8)
    for s in range(0, len(all_labels), 65536):
        lab = all_labels[s:s + 65536]
        within = np.zeros(len(lab))
        for j in range(k):
            m = (lab == j).astype(np.float64)
            size = m.sum(axis=1)
            quad = np.einsum("ni,ij,nj->n", m, g, m)
            within += np.divide(quad, size, out=np.zeros_like(quad), where=size > 0)
        cost = (trace - within) / n
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost, best_labels = float(cost[i]), lab[i].astype(np.intp)
    return best_labels, best_cost


def pair_counting_ari(pred, truth) -> float:
    """ARI by explicit enumeration of all point pairs."""
    pred, truth = list(pred), list(truth)
    if len(pred) != len(truth):
        raise ValueError("label vectors differ in length")
    a = b = c = d = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        same_p, same_t = pred[i] == pred[j], truth[i] == truth[j]
        if same_p and same_t:
            a += 1
        elif same_p:
            b += 1
        elif same_t:
            c += 1
        else:
            d += 1
    total = a + b + c + d
    if total == 0:
        return 1.0
    expected = (a + b) * (a + c) / total
    max_index = ((a + b) + (a + c)) / 2
    if max_index == expected:
        return 1.0 if b == c == 0 else 0.0
    return (a - expected) / (max_index - expected)
