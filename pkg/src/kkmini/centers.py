"""Feature-space centers as sparse weighted combinations of data points.

Nothing here materializes phi(x): every quantity is a kernel sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_TOL = 1e-12


@dataclass
class SparseCenter:
    """sum_p w_p phi(x_p); duplicate indices add up.

    Weights are nonnegative with total in (0, 1]; the total is 1 for convex
    combinations and below 1 for truncated centers that lost their oldest mass.
    """

    indices: np.ndarray
    weights: np.ndarray
    _self_ip: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp).ravel()
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if self.indices.shape != self.weights.shape:
            raise ValueError("indices and weights differ in length")
        if self.indices.size == 0:
            raise ValueError("a center needs at least one member")
        if np.any(self.weights < 0):
            raise ValueError("center weights must be nonnegative")
        total = float(self.weights.sum())
        if not (0.0 < total <= 1.0 + WEIGHT_TOL):
            raise ValueError(f"center weight total {total} outside (0, 1]")

    @classmethod
    def singleton(cls, i: int) -> "SparseCenter":
        return cls(np.array([i]), np.array([1.0]))

    @classmethod
    def uniform(cls, members) -> "SparseCenter":
        """Center of mass of a tuple of points (repetitions allowed)."""
        members = np.asarray(members, dtype=np.intp)
        return cls(members, np.full(members.size, 1.0 / members.size))

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def self_ip(self, kern) -> float:
        if self._self_ip is None:
            self._self_ip = _bilinear(kern, self.indices, self.weights, self.indices, self.weights)
        return self._self_ip

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        np.add.at(out, self.indices, self.weights)
        return out


@dataclass
class Assignment:
    labels: np.ndarray
    counts: np.ndarray


def _bilinear(kern, ia, wa, ib, wb) -> float:
    return float(wa @ kern.block(ia, ib) @ wb)


def center_point_ip(kern, c: SparseCenter, x: int) -> float:
    """<phi(x), C> = sum_p w_p K(x, x_p)."""
    return float(kern.block([x], c.indices)[0] @ c.weights)


def center_center_ip(kern, a: SparseCenter, b: SparseCenter) -> float:
    return _bilinear(kern, a.indices, a.weights, b.indices, b.weights)


def center_sq_dist(kern, c: SparseCenter, x: int) -> float:
    """||phi(x) - C||^2; negative values are possible for indefinite kernels."""
    return float(kern.diag([x])[0] - 2.0 * center_point_ip(kern, c, x) + c.self_ip(kern))


def stack_weights(centers) -> tuple[np.ndarray, np.ndarray]:
    """Union of member indices and the (members x k) weight matrix over it."""
    uniq, inv = np.unique(np.concatenate([c.indices for c in centers]), return_inverse=True)
    w = np.zeros((uniq.size, len(centers)))
    pos = 0
    for j, c in enumerate(centers):
        m = c.indices.size
        np.add.at(w[:, j], inv[pos:pos + m], c.weights)
        pos += m
    return uniq, w


def center_point_ips(kern, centers, points, chunk=4096) -> np.ndarray:
    """(len(points) x k) matrix of <phi(x), C_j>."""
    points = np.asarray(points, dtype=np.intp)
    uniq, w = stack_weights(centers)
    out = np.empty((points.size, len(centers)))
    for s in range(0, points.size, chunk):
        out[s:s + chunk] = kern.block(points[s:s + chunk], uniq) @ w
    return out


def sq_dists(kern, centers, points) -> np.ndarray:
    points = np.asarray(points, dtype=np.intp)
    ip = center_point_ips(kern, centers, points)
    cc = np.array([c.self_ip(kern) for c in centers])
    return kern.diag(points)[:, None] - 2.0 * ip + cc[None, :]


def argmin_labels(dist: np.ndarray) -> np.ndarray:
    """Row-wise argmin; np.argmin returns the first minimum, i.e. lowest center index."""
    return np.argmin(dist, axis=1)


def assign_batch(kern, centers, points) -> Assignment:
    """Nearest center for each point (ties to the lowest center index)."""
    if len(centers) < 1:
        raise ValueError("need at least one center")
    labels = argmin_labels(sq_dists(kern, centers, points))
    return Assignment(labels, np.bincount(labels, minlength=len(centers)))
