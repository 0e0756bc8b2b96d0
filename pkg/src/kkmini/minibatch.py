"""Mini-batch kernel k-means with the recursive inner-product update.

State per run is the n x k matrix ip[x, j] = <phi(x), C_j> and the vector
cc[j] = <C_j, C_j>. One step touches n*b kernel entries and O(nk) state.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .centers import argmin_labels, center_point_ips

LR_KINDS = ("sqrt", "count")


class LearningRate:
    """Per-center learning rate from batch cluster sizes.

    ``sqrt``: alpha_j = sqrt(b_j / b), constant in time.
    ``count``: alpha_j = b_j / N_j with N_j the running count of points seen by
    center j (including this batch), N_j starting at 1.
    """

    def __init__(self, kind: str, k: int):
        if kind not in LR_KINDS:
            raise ValueError(f"unknown learning rate {kind!r}")
        self.kind = kind
        self.seen = np.ones(k)

    def __call__(self, counts: np.ndarray, b: int) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.float64)
        if self.kind == "sqrt":
            return np.sqrt(counts / b)
        self.seen += counts
        return counts / self.seen


@dataclass
class IpState:
    ip: np.ndarray
    cc: np.ndarray
    iteration: int = 0

    @classmethod
    def from_centers(cls, kern, centers) -> "IpState":
        ip = center_point_ips(kern, centers, np.arange(kern.n))
        cc = np.array([c.self_ip(kern) for c in centers])
        return cls(ip, cc)

    def dists(self, kern, points) -> np.ndarray:
        return kern.diag(points)[:, None] - 2.0 * self.ip[points] + self.cc[None, :]


@dataclass
class StepResult:
    batch: np.ndarray
    labels: np.ndarray
    counts: np.ndarray
    alphas: np.ndarray
    f_before: float
    f_after: float

    @property
    def improvement(self) -> float:
        return self.f_before - self.f_after


def batch_means(kern_block: np.ndarray, labels: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Columns j = (1/b_j) sum_{y in B_j} K(., y); zero for empty clusters."""
    k = counts.size
    m = np.zeros((labels.size, k))
    nz = counts[labels] > 0
    m[np.arange(labels.size)[nz], labels[nz]] = 1.0 / counts[labels[nz]]
    return kern_block @ m


def minibatch_step(state: IpState, kern, b: int, lr: LearningRate, rng, batch=None) -> StepResult:
    if batch is None:
        batch = rng.integers(0, kern.n, size=b)
    batch = np.asarray(batch, dtype=np.intp)
    k = state.cc.size
    dist = state.dists(kern, batch)
    labels = argmin_labels(dist)
    f_before = float(dist[np.arange(batch.size), labels].mean())
    counts = np.bincount(labels, minlength=k)
    alphas = lr(counts, batch.size)

    touched = np.flatnonzero(counts)
    kxb = kern.block(np.arange(kern.n), batch)
    cm_ip = batch_means(kxb, labels, counts)  # <phi(x), cm(B_j)>
    for j in touched:
        a = alphas[j]
        members = batch[labels == j]
        c_dot_cm = float(state.ip[members, j].mean())
        cm_dot_cm = float(cm_ip[members, j].mean())
        state.cc[j] = (1 - a) ** 2 * state.cc[j] + 2 * a * (1 - a) * c_dot_cm + a * a * cm_dot_cm
        state.ip[:, j] = (1 - a) * state.ip[:, j] + a * cm_ip[:, j]
    state.iteration += 1

    after = state.dists(kern, batch)
    f_after = float(after.min(axis=1).mean())
    return StepResult(batch, labels, counts, alphas, f_before, f_after)


def should_stop(improvement: float, epsilon: float | None, literal: bool = False) -> bool:
    """Early stopping test; ``epsilon`` of None or <= 0 disables it.

    Default: stop once the batch improvement f_B(C_i) - f_B(C_i+1) drops below
    epsilon. ``literal=True`` tests f_B(C_i+1) - f_B(C_i) < epsilon instead.
    """
    if epsilon is None or epsilon <= 0:
        return False
    delta = -improvement if literal else improvement
    return delta < epsilon


@dataclass
class FitResult:
    labels: np.ndarray
    cost: float
    n_iter: int
    iter_times: list = field(default_factory=list)
    batch_objectives: list = field(default_factory=list)
    improvements: list = field(default_factory=list)
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def minibatch_fit(kern, init, b: int, max_iters: int, rng, lr: str = "sqrt",
                  epsilon: float | None = None, literal_stop: bool = False,
                  callback=None, record=False) -> FitResult:
    """Run mini-batch steps until early stopping or ``max_iters``.

    ``callback(state, step)`` is invoked after every step (oracle checks).
    ``record=True`` keeps each step's batch labels in ``history``.
    """
    if b < 1:
        raise ValueError("batch size must be >= 1")
    state = IpState.from_centers(kern, init)
    rate = LearningRate(lr, len(init))
    res = FitResult(labels=np.empty(0, dtype=np.intp), cost=np.nan, n_iter=0)
    for _ in range(max_iters):
        t0 = time.perf_counter()
        step = minibatch_step(state, kern, b, rate, rng)
        res.iter_times.append(time.perf_counter() - t0)
        res.batch_objectives.append(step.f_after)
        res.improvements.append(step.improvement)
        res.n_iter += 1
        if record:
            res.history.append(step)
        if callback is not None:
            callback(state, step)
        if should_stop(step.improvement, epsilon, literal_stop):
            break
    allx = np.arange(kern.n)
    dist = state.dists(kern, allx)
    res.labels = argmin_labels(dist)
    res.cost = float(dist[allx, res.labels].mean())
    res.extra["state"] = state
    return res
