"""Datasets, synthetic generators and graph-derived kernel matrices."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .kernels import KernelSpec
from .seeding import make_rng

HEAT_DENSE_LIMIT = 20000
TAYLOR_TERMS = 18


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a dataset needs an n x d matrix with n >= 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per point")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n


def load_csv(path, label_column: str | None = None, name: str | None = None) -> Dataset:
    """Read a headered CSV; every column except ``label_column`` is a feature.

    Labels are integer-coded in order of first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if label_column is not None and label_column not in header:
        raise ValueError(f"{path}: no column named {label_column!r}")
    lab_pos = header.index(label_column) if label_column is not None else None
    feats, raw_labels = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for pos, cell in enumerate(row):
            if pos == lab_pos:
                raw_labels.append(cell.strip())
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value {cell!r}") from None
        feats.append(vals)
    labels = None
    if lab_pos is not None:
        codes: dict[str, int] = {}
        labels = np.array([codes.setdefault(v, len(codes)) for v in raw_labels], dtype=np.int64)
    return Dataset(np.array(feats, dtype=np.float64).reshape(len(rows), -1), labels,
                   name or path.stem)


def gen_blobs(n, k, d, spread, seed, box=10.0) -> Dataset:
    """Isotropic Gaussian blobs; point i belongs to component i mod k."""
    if not (n >= k >= 1) or d < 1 or spread < 0:
        raise ValueError("need n >= k >= 1, d >= 1 and spread >= 0")
    rng = make_rng(seed)
    centers = rng.uniform(-box, box, size=(k, d))
    labels = np.arange(n) % k
    pts = centers[labels] + spread * rng.standard_normal((n, d))
    return Dataset(pts, labels, f"blobs-n{n}-k{k}-d{d}")


def gen_circles(n, radii, noise, seed) -> Dataset:
    """Concentric circles in the plane with Gaussian radial noise of std ``noise``."""
    radii = np.atleast_1d(np.asarray(radii, dtype=np.float64))
    if n < 1 or radii.size < 1 or noise < 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("need n >= 1, positive strictly increasing radii and noise >= 0")
    rng = make_rng(seed)
    labels = np.arange(n) % radii.size
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = radii[labels] + noise * rng.standard_normal(n)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Dataset(pts, labels, f"circles-n{n}")


@dataclass(frozen=True)
class KnnGraph:
    adjacency: sparse.csr_matrix = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    k_nn: int = 1


def knn_graph(points, k_nn, block=1024) -> KnnGraph:
    """Exact Euclidean k-nn graph, union-symmetrized, without self loops.

    Distance ties are resolved towards the lower index.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not (1 <= k_nn < n):
        raise ValueError(f"need 1 <= k_nn < n, got k_nn={k_nn}, n={n}")
    sq = np.einsum("ij,ij->i", pts, pts)
    nbrs = np.empty((n, k_nn), dtype=np.int64)
    for s in range(0, n, block):
        rows = np.arange(s, min(s + block, n))
        d2 = sq[rows, None] + sq[None, :] - 2.0 * (pts[rows] @ pts.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(rows.size), rows] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        nbrs[rows] = order[:, :k_nn]
    r = np.repeat(np.arange(n), k_nn)
    c = nbrs.ravel()
    a = sparse.coo_matrix((np.ones(r.size), (r, c)), shape=(n, n)).tocsr()
    a = ((a + a.T) > 0).astype(np.float64).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    deg = np.asarray(a.sum(axis=1)).ravel()
    assert np.all(deg >= 1), "isolated vertex in symmetrized k-nn graph"
    return KnnGraph(a, deg, int(k_nn))


def build_knn_kernel(dataset: Dataset, k_nn: int) -> KernelSpec:
    """D^-1 A D^-1 for the symmetrized k-nn adjacency A (generally indefinite)."""
    g = knn_graph(dataset.points, k_nn)
    inv = 1.0 / g.degrees
    a = g.adjacency.multiply(inv[:, None]).multiply(inv[None, :])
    return KernelSpec.precomputed(a.toarray(), label="knn", params=(("knn", int(k_nn)),))


def build_heat_kernel(dataset: Dataset, k_nn: int, t: float, variant: str = "adjacency") -> KernelSpec:
    """Heat kernel on the symmetrized k-nn graph, N = D^-1/2 A D^-1/2.

    ``variant="adjacency"`` gives exp(-t N); ``variant="laplacian"`` gives
    exp(-t (I - N)) = e^-t exp(t N).
    """
    if not (0 < t < np.inf):
        raise ValueError("heat kernel needs 0 < t < inf")
    if variant not in ("adjacency", "laplacian"):
        raise ValueError(f"unknown heat variant {variant!r}")
    if dataset.n > HEAT_DENSE_LIMIT:
        raise ValueError(f"dense heat kernel is capped at n <= {HEAT_DENSE_LIMIT}")
    g = knn_graph(dataset.points, k_nn)
    s = 1.0 / np.sqrt(g.degrees)
    norm_adj = g.adjacency.multiply(s[:, None]).multiply(s[None, :]).toarray()
    if variant == "adjacency":
        h = matrix_exp_symmetric(-t * norm_adj)
    else:
        h = matrix_exp_symmetric(t * norm_adj)
        h *= np.exp(-t)
    return KernelSpec.precomputed(h, label="heat",
                                  params=(("knn", int(k_nn)), ("t", float(t)), ("variant", variant)))


def matrix_exp_symmetric(m) -> np.ndarray:
    """exp(M) for symmetric M by scaling and squaring with a degree-18 Taylor sum."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix exponential needs a square matrix")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if m.size and np.max(np.abs(m - m.T)) > 1e-9 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    norm1 = float(np.max(np.sum(np.abs(m), axis=0))) if m.size else 0.0
    s = 0
    if norm1 > 0.5:
        s = int(np.ceil(np.log2(norm1 / 0.5)))
    a = m / (2.0 ** s)
    n = m.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    for j in range(1, TAYLOR_TERMS + 1):
        term = term @ a
        term /= j
        out += term
    for _ in range(s):
        out = out @ out
    out += out.T
    out *= 0.5
    return out
