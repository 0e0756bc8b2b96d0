"""Full-batch kernel k-means (Lloyd's algorithm in feature space)."""
from __future__ import annotations

import time

import numpy as np

from .centers import argmin_labels, center_point_ips
from .minibatch import FitResult


def _cluster_sums(kern, labels, k, block):
    """T[x, j] = sum_{y in A_j} K(x, y) for all x, by row blocks."""
    n = kern.n
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    if kern.materialized:
        kern.evals += n * n
        return kern.gram @ onehot
    t = np.empty((n, k))
    for s in range(0, n, block):
        e = min(s + block, n)
        t[s:e] = kern.row_block(s, e) @ onehot
    return t


def full_batch_fit(kern, init, max_iters: int = 200, tol: float = 0.0,
                   stop_at_fixed_point: bool = True, record_labels: bool = False,
                   check_caches: bool = False) -> FitResult:
    """Lloyd iterations with implicit centers cm(A_j).

    Distances use Delta(x, cm(A)) = K(x,x) - 2 T_j(x)/|A| + S_j/|A|^2 with
    T_j(x) = sum_{y in A_j} K(x,y) and S_j = sum_{x in A_j} T_j(x). An empty
    cluster keeps its previous center. ``cost_trace`` (batch_objectives) holds
    f_X after each iteration; entry 0 of ``extra["costs"]`` is the initial cost.
    Stops at a label fixed point (unless disabled), when the improvement falls
    below ``tol`` (tol > 0 only), or after ``max_iters`` iterations.
    """
    n, k = kern.n, len(init)
    if n < 1:
        raise ValueError("empty dataset")
    diag = kern.diag()
    block = kern.row_chunk
    allx = np.arange(n)

    ip = center_point_ips(kern, init, allx)  # <phi(x), C_j>
    cc = np.array([c.self_ip(kern) for c in init])
    dist = diag[:, None] - 2.0 * ip + cc[None, :]
    labels = argmin_labels(dist)
    cost = float(dist[allx, labels].mean())
    res = FitResult(labels=labels, cost=cost, n_iter=0)
    res.extra["costs"] = [cost]
    if record_labels:
        res.history.append(labels.copy())

    for _ in range(max_iters):
        t0 = time.perf_counter()
        sizes = np.bincount(labels, minlength=k)
        t = _cluster_sums(kern, labels, k, block)
        s = np.bincount(labels, weights=t[allx, labels], minlength=k)
        live = sizes > 0
        ip[:, live] = t[:, live] / sizes[live]
        cc[live] = s[live] / sizes[live] ** 2
        if check_caches:
            _check_caches(kern, labels, k, t, s)
        dist = diag[:, None] - 2.0 * ip + cc[None, :]
        new_labels = argmin_labels(dist)
        new_cost = float(dist[allx, new_labels].mean())
        res.iter_times.append(time.perf_counter() - t0)
        res.batch_objectives.append(new_cost)
        res.extra["costs"].append(new_cost)
        res.n_iter += 1
        if record_labels:
            res.history.append(new_labels.copy())
        fixed = np.array_equal(new_labels, labels)
        improvement = cost - new_cost
        labels, cost = new_labels, new_cost
        if stop_at_fixed_point and fixed:
            break
        if tol > 0 and improvement < tol:
            break
    res.labels, res.cost = labels, cost
    return res


def _check_caches(kern, labels, k, t, s):
    g = kern.block(np.arange(kern.n), np.arange(kern.n))
    for j in range(k):
        members = np.flatnonzero(labels == j)
        tj = g[:, members].sum(axis=1)
        sj = g[np.ix_(members, members)].sum()
        assert np.allclose(t[:, j], tj, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(tj).max(initial=0)))
        assert abs(s[j] - sj) <= 1e-8 * max(1.0, abs(sj))
