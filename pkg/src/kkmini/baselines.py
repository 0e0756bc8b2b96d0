"""Input-space k-means baselines (Lloyd and mini-batch).

Same conventions as the kernel solvers: ties go to the lowest center index,
empty clusters keep their center, and the mini-batch variant consumes the run
RNG with one ``integers(0, n, size=b)`` call per iteration.
"""
from __future__ import annotations

import time

import numpy as np

from .minibatch import FitResult, LearningRate, should_stop


def _sq_dists(points, centers):
    d = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d


def _sq_dists_fast(points, centers):
    sq = np.einsum("ij,ij->i", points, points)
    d = sq[:, None] - 2.0 * points @ centers.T + np.einsum("ij,ij->i", centers, centers)[None, :]
    return np.maximum(d, 0.0)


def euclidean_lloyd(points, init_centers, max_iters=200, record_labels=False,
                    stop_at_fixed_point=True, exact=True) -> FitResult:
    """Plain Lloyd's algorithm on explicit coordinates.

    ``exact=True`` forms x - c differences directly (reference quality);
    ``exact=False`` uses the norm expansion (faster on large inputs).
    """
    x = np.asarray(points, dtype=np.float64)
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    k = centers.shape[0]
    dist_fn = _sq_dists if exact else _sq_dists_fast
    d = dist_fn(x, centers)
    labels = np.argmin(d, axis=1)
    res = FitResult(labels=labels, cost=float(d[np.arange(len(x)), labels].mean()), n_iter=0)
    if record_labels:
        res.history.append(labels.copy())
    for _ in range(max_iters):
        t0 = time.perf_counter()
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
        d = dist_fn(x, centers)
        new_labels = np.argmin(d, axis=1)
        res.iter_times.append(time.perf_counter() - t0)
        res.n_iter += 1
        res.cost = float(d[np.arange(len(x)), new_labels].mean())
        res.batch_objectives.append(res.cost)
        if record_labels:
            res.history.append(new_labels.copy())
        fixed = np.array_equal(new_labels, labels)
        labels = new_labels
        if stop_at_fixed_point and fixed:
            break
    res.labels = labels
    res.extra["centers"] = centers
    return res


def euclidean_minibatch(points, init_centers, b, max_iters, rng, lr="sqrt",
                        epsilon=None, literal_stop=False) -> FitResult:
    """Mini-batch k-means: C_j <- (1 - a_j) C_j + a_j mean(B_j)."""
    x = np.asarray(points, dtype=np.float64)
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    k = centers.shape[0]
    rate = LearningRate(lr, k)
    res = FitResult(labels=np.empty(0, dtype=np.intp), cost=np.nan, n_iter=0)

    for _ in range(max_iters):
        t0 = time.perf_counter()
        batch = rng.integers(0, len(x), size=b)
        xb = x[batch]
        d = _sq_dists_fast(xb, centers)
        labels = np.argmin(d, axis=1)
        f_before = float(d[np.arange(b), labels].mean())
        counts = np.bincount(labels, minlength=k)
        alphas = rate(counts, b)
        for j in np.flatnonzero(counts):
            centers[j] = (1 - alphas[j]) * centers[j] + alphas[j] * xb[labels == j].mean(axis=0)
        f_after = float(_sq_dists_fast(xb, centers).min(axis=1).mean())
        res.iter_times.append(time.perf_counter() - t0)
        res.n_iter += 1
        res.batch_objectives.append(f_after)
        res.improvements.append(f_before - f_after)
        if should_stop(f_before - f_after, epsilon, literal_stop):
            break
    d = _sq_dists_fast(x, centers)
    res.labels = np.argmin(d, axis=1)
    res.cost = float(d[np.arange(len(x)), res.labels].mean())
    res.extra["centers"] = centers
    return res
