"""Truncated mini-batch kernel k-means with sliding-window sparse centers.

Each center keeps only its most recent batch-cluster means: the window is the
shortest suffix of nonempty updates holding at least ``tau`` batch points.
Until that much mass has arrived the window reaches back to the first
iteration and the initial center is kept as a decayed tail, so the center is
exactly the untruncated one. Per-iteration work depends on k, b and tau only.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .centers import SparseCenter, argmin_labels, stack_weights
from .minibatch import FitResult, LearningRate, StepResult, should_stop

SELF_IP_MODES = ("full", "incremental")
_RENORM_AT = -30.0


def auto_tau(b: int, gamma: float, epsilon: float) -> int:
    """tau = ceil(b ln^2(28 gamma / epsilon)), the setting that keeps every
    truncated center within epsilon/28 of its untruncated counterpart."""
    if epsilon is None or epsilon <= 0:
        raise ValueError("tau=auto needs epsilon > 0")
    if gamma <= 0:
        raise ValueError("tau=auto needs gamma > 0")
    ratio = 28.0 * gamma / epsilon
    if ratio <= 1.0:
        return 1
    return max(1, math.ceil(b * math.log(ratio) ** 2))


@dataclass
class WindowEntry:
    iteration: int
    members: np.ndarray
    base: np.ndarray  # per-member weights, sum 1
    log_raw: float  # log(coefficient) minus the owner's log_scale
    count: int


class TruncatedCenter:
    """Window of decayed batch means plus (early on) the decayed initial center."""

    def __init__(self, init: SparseCenter, kern, incremental: bool = False):
        self.window: deque[WindowEntry] = deque()
        self.tail: WindowEntry | None = WindowEntry(0, init.indices, init.weights, 0.0, 0)
        self.log_scale = 0.0
        self.member_count = 0
        self.dropped = 0.0  # independently tracked forgotten mass
        self.incremental = incremental
        self.self_ip = init.self_ip(kern)
        self._g = np.array([[self.self_ip]]) if incremental else None

    def blocks(self) -> list[WindowEntry]:
        return ([self.tail] if self.tail is not None else []) + list(self.window)

    def coefficients(self) -> np.ndarray:
        return np.exp(np.array([e.log_raw for e in self.blocks()]) + self.log_scale)

    def materialize(self) -> SparseCenter:
        blocks = self.blocks()
        coefs = self.coefficients()
        idx = np.concatenate([e.members for e in blocks])
        w = np.concatenate([c * e.base for c, e in zip(coefs, blocks)])
        c = SparseCenter(idx, w)
        c._self_ip = self.self_ip
        return c

    @property
    def total_weight(self) -> float:
        return float(self.coefficients().sum())

    def update(self, members, alpha: float, iteration: int, tau: int, g_row=None) -> list:
        """Blend in cm(members) with rate ``alpha`` and re-trim the window.

        ``g_row`` = (inner products of cm(members) with the current blocks,
        <cm(members), cm(members)>) feeds the incremental self-ip cache.
        Returns the entries that left the center.
        """
        if alpha <= 0.0:
            return []
        members = np.asarray(members, dtype=np.intp)
        if alpha >= 1.0:
            # every older coefficient is exactly zero
            gone = self.blocks()
            self.window.clear()
            self.tail = None
            self.log_scale = 0.0
            self.member_count = 0
            self.dropped = 0.0
            log_raw = 0.0
            if g_row is not None and self._g is not None:
                self._g = np.array([[g_row[1]]])
        else:
            gone = []
            self.log_scale += math.log1p(-alpha)
            self.dropped *= 1.0 - alpha
            log_raw = math.log(alpha) - self.log_scale
            if g_row is not None and self._g is not None:
                r, r_new = g_row
                m = self._g.shape[0]
                g = np.empty((m + 1, m + 1))
                g[:m, :m] = self._g
                g[m, :m] = g[:m, m] = r
                g[m, m] = r_new
                self._g = g
        self.window.append(WindowEntry(iteration, members,
                                       np.full(members.size, 1.0 / members.size),
                                       log_raw, int(members.size)))
        self.member_count += int(members.size)

        removed = 0
        while len(self.window) > 1 and self.member_count - self.window[0].count >= tau:
            e = self.window.popleft()
            self.member_count -= e.count
            self.dropped += math.exp(e.log_raw + self.log_scale)
            gone.append(e)
            removed += 1
            removed += self._drop_tail(gone)
        if self.tail is not None and self.member_count >= tau and self.window[0].iteration != 1:
            removed += self._drop_tail(gone)
        if removed and self._g is not None:
            self._g = self._g[removed:, removed:]

        if self.log_scale < _RENORM_AT:
            for e in self.blocks():
                e.log_raw += self.log_scale
            self.log_scale = 0.0
        return gone

    def _drop_tail(self, gone) -> int:
        if self.tail is None:
            return 0
        gone.append(self.tail)
        self.dropped += math.exp(self.tail.log_raw + self.log_scale)
        self.tail = None
        return 1

    def refresh_self_ip(self, kern) -> float:
        if self._g is not None:
            c = self.coefficients()
            self.self_ip = float(c @ self._g @ c)
        else:
            c = self.materialize()
            uniq, inv = np.unique(c.indices, return_inverse=True)
            w = np.bincount(inv, weights=c.weights, minlength=uniq.size)
            self.self_ip = float(w @ kern.block(uniq, uniq) @ w)
        return self.self_ip

    def check_invariants(self, tau: int, b: int) -> None:
        coefs = self.coefficients()
        assert np.all(coefs >= 0) and np.all(coefs <= 1.0 + 1e-12)
        assert self.member_count == sum(e.count for e in self.window)
        assert self.member_count <= tau + b, (self.member_count, tau, b)
        if len(self.window) > 1:
            assert self.member_count - self.window[0].count < tau
        total = float(coefs.sum())
        assert abs(total - (1.0 - self.dropped)) <= 1e-9, (total, self.dropped)
        if self.tail is not None:
            assert abs(total - 1.0) <= 1e-9


def truncated_step(centers: list[TruncatedCenter], kern, b: int, tau: int, lr: LearningRate,
                   rng, iteration: int, batch=None) -> StepResult:
    """One truncated update.

    Kernel work is one pass over K(batch, batch + window members), plus the
    self-ip refresh in ``full`` mode. Every inner product needed afterwards is
    a combination of R[x, q] = <phi(x), cm(block q)>.
    """
    if batch is None:
        batch = rng.integers(0, kern.n, size=b)
    batch = np.asarray(batch, dtype=np.intp)
    k = len(centers)
    before = [(c.blocks(), c.coefficients()) for c in centers]
    flat = [e for blocks, _ in before for e in blocks]
    offsets = np.cumsum([0] + [len(blocks) for blocks, _ in before])

    bu, binv = np.unique(batch, return_inverse=True)
    ptr = np.cumsum([0] + [e.members.size for e in flat])
    kbb, r = kern.window_products(bu, np.concatenate([e.members for e in flat]),
                                  np.concatenate([e.base for e in flat]), ptr)
    r = r[binv]

    ip_old = np.column_stack([r[:, offsets[j]:offsets[j + 1]] @ before[j][1] for j in range(k)])
    cc = np.array([c.self_ip for c in centers])
    diag_b = kern.diag(batch)
    dist = diag_b[:, None] - 2.0 * ip_old + cc[None, :]
    labels = argmin_labels(dist)
    f_before = float(dist[np.arange(batch.size), labels].mean())
    counts = np.bincount(labels, minlength=k)
    alphas = lr(counts, batch.size)

    v = np.zeros((bu.size, k))
    np.add.at(v, (binv, labels), 1.0)
    v /= np.maximum(counts, 1)[None, :]
    m_new = (kbb @ v)[binv]  # <phi(x), cm(B_j)>

    ip_new = ip_old.copy()
    for j in np.flatnonzero(counts):
        c, a = centers[j], float(alphas[j])
        if a <= 0.0:
            continue
        rows = np.flatnonzero(labels == j)
        r_j = r[:, offsets[j]:offsets[j + 1]]
        g_row = None
        if c.incremental:
            g_row = (r_j[rows].mean(axis=0), float(m_new[rows, j].mean()))
        c.update(batch[rows], a, iteration, tau, g_row)
        c.refresh_self_ip(kern)
        col_of = {id(e): q for q, e in enumerate(before[j][0])}
        blocks, coefs = c.blocks(), c.coefficients()
        ip = coefs[-1] * m_new[:, j]
        for e, coef in zip(blocks[:-1], coefs[:-1]):
            ip += coef * r_j[:, col_of[id(e)]]
        ip_new[:, j] = ip

    cc_new = np.array([c.self_ip for c in centers])
    after = diag_b[:, None] - 2.0 * ip_new + cc_new[None, :]
    f_after = float(after.min(axis=1).mean())
    return StepResult(batch, labels, counts, alphas, f_before, f_after)


def truncated_fit(kern, init, b: int, tau: int, max_iters: int, rng, lr: str = "sqrt",
                  epsilon: float | None = None, literal_stop: bool = False,
                  self_ip_mode: str = "full", callback=None, record=False,
                  check=False, final_assign=True) -> FitResult:
    """Run truncated steps until early stopping or ``max_iters``.

    ``callback(centers, step, iteration)`` runs after every step; ``check``
    asserts the window invariants after every step.
    """
    if b < 1 or tau < 1:
        raise ValueError("need b >= 1 and tau >= 1")
    if self_ip_mode not in SELF_IP_MODES:
        raise ValueError(f"unknown self-ip mode {self_ip_mode!r}")
    centers = [TruncatedCenter(c, kern, incremental=self_ip_mode == "incremental") for c in init]
    rate = LearningRate(lr, len(init))
    res = FitResult(labels=np.empty(0, dtype=np.intp), cost=np.nan, n_iter=0)
    for it in range(1, max_iters + 1):
        t0 = time.perf_counter()
        step = truncated_step(centers, kern, b, tau, rate, rng, it)
        res.iter_times.append(time.perf_counter() - t0)
        res.batch_objectives.append(step.f_after)
        res.improvements.append(step.improvement)
        res.n_iter += 1
        if record:
            res.history.append(step)
        if check:
            for c in centers:
                c.check_invariants(tau, b)
        if callback is not None:
            callback(centers, step, it)
        if should_stop(step.improvement, epsilon, literal_stop):
            break
    if final_assign:
        res.labels, res.cost = assign_all(kern, centers)
    res.extra["centers"] = centers
    res.extra["tau"] = tau
    return res


def assign_all(kern, centers, chunk=2048):
    """Labels and mean squared distance for the whole dataset."""
    mats = [c.materialize() for c in centers]
    uniq, w = stack_weights(mats)
    cc = np.array([c.self_ip for c in centers])
    ip = np.zeros((kern.n, len(centers)))
    # K(support, all) row blocks read the Gram contiguously
    for s in range(0, uniq.size, chunk):
        ip += kern.rows(uniq[s:s + chunk]).T @ w[s:s + chunk]
    d = kern.diag()[:, None] - 2.0 * ip + cc[None, :]
    labels = argmin_labels(d)
    return labels, float(d[np.arange(kern.n), labels].mean())
