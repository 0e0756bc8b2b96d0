"""Random streams and initial centers.

Every run draws from one Philox4x64 (counter-based) stream created by
:func:`make_rng`. Stream protocol: all initialization draws happen first,
then one ``integers(0, n, size=b)`` call per mini-batch iteration.
"""
from __future__ import annotations

import numpy as np

from .centers import SparseCenter

# D^2 values below -NEG_TOL * scale indicate an indefinite kernel, not rounding
NEG_TOL = 1e-9


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def kmeans_pp(kern, k: int, rng: np.random.Generator, first: int | None = None,
              stats: dict | None = None) -> list[SparseCenter]:
    """Kernel k-means++ (D^2 sampling in feature space); singleton centers.

    Negative D^2 (indefinite kernels) is clamped to 0. If all remaining mass is
    zero the next center is drawn uniformly among points not yet chosen.
    """
    n = kern.n
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    diag = kern.diag()
    chosen = [int(rng.integers(n)) if first is None else int(first)]
    allx = np.arange(n)
    d2 = np.full(n, np.inf)
    clamped = 0
    for _ in range(1, k):
        c = chosen[-1]
        col = kern.rows([c])[0]  # K(c, .) = K(., c)
        d2 = np.minimum(d2, diag - 2.0 * col + diag[c])
        scale = max(float(np.max(np.abs(diag))), 1e-300)
        clamped += int(np.count_nonzero(d2 < -NEG_TOL * scale))
        w = np.maximum(d2, 0.0)
        w[chosen] = 0.0
        total = float(w.sum())
        if total > 0.0:
            cdf = np.cumsum(w)
            u = rng.random() * cdf[-1]
            nxt = int(np.searchsorted(cdf, u, side="right"))
            nxt = min(nxt, n - 1)
            while w[nxt] == 0.0:  # guards u landing exactly on a flat step
                nxt -= 1
        else:
            free = np.setdiff1d(allx, chosen)
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
    if stats is not None:
        stats["clamped"] = clamped
        stats["indices"] = list(chosen)
    return [SparseCenter.singleton(i) for i in chosen]


def uniform_init(n: int, k: int, rng: np.random.Generator) -> list[SparseCenter]:
    """k distinct uniformly chosen points as singleton centers."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    idx = rng.choice(n, size=k, replace=False)
    return [SparseCenter.singleton(int(i)) for i in idx]


def init_centers(method: str, kern, k: int, rng) -> list[SparseCenter]:
    if method in ("kpp", "kmeans++"):
        return kmeans_pp(kern, k, rng)
    if method == "uniform":
        return uniform_init(kern.n, k, rng)
    raise ValueError(f"unknown init method {method!r}")
