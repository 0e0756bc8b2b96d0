"""Kernel functions, Gram blocks and the feature-space norm bound gamma.

Analytic kernels (Gaussian, linear, polynomial) are evaluated from data rows;
precomputed kernels are looked up by index. All arithmetic is float64.
"""
from __future__ import annotations

import csv
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel

KINDS = ("gaussian", "linear", "polynomial", "precomputed")
KKM1_MAGIC = b"KKM1"
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description.

    ``label`` is a reporting name ("gaussian", "knn", "heat", ...); graph
    kernels are precomputed matrices built in :mod:`kkmini.data`.
    """

    kind: str
    kappa: float | None = None
    degree: int = 2
    coef0: float = 1.0
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)
    label: str = ""
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.kappa is None or not np.isfinite(self.kappa) or self.kappa <= 0:
                raise ValueError("gaussian kernel needs kappa > 0")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError("polynomial degree must be an integer >= 1")
        if self.kind == "precomputed":
            if self.matrix is None:
                raise ValueError("precomputed kernel needs a matrix")
            m = np.asarray(self.matrix, dtype=np.float64)
            check_symmetric(m)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    @classmethod
    def gaussian(cls, kappa):
        return cls("gaussian", kappa=float(kappa), params=(("kappa", float(kappa)),))

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def polynomial(cls, degree=2, coef0=1.0):
        return cls("polynomial", degree=int(degree), coef0=float(coef0),
                   params=(("degree", int(degree)), ("coef0", float(coef0))))

    @classmethod
    def precomputed(cls, matrix, label="precomputed", params=()):
        return cls("precomputed", matrix=matrix, label=label, params=tuple(params))

    @property
    def is_precomputed(self):
        return self.kind == "precomputed"

    def describe(self):
        """Compact ``k=v;k=v`` parameter string used in result tables."""
        return ";".join(f"{k}={v}" for k, v in self.params)


def check_symmetric(m, rtol=SYMMETRY_RTOL, block=2048):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"kernel matrix must be square, got shape {m.shape}")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    n = m.shape[0]
    # blockwise so that n ~ 1e4 matrices do not need a second n x n buffer
    for s in range(0, n, block):
        dev = np.max(np.abs(m[s:s + block] - m[:, s:s + block].T), initial=0.0)
        if dev > rtol * max(scale, 1e-300):
            raise ValueError(f"kernel matrix is not symmetric (max deviation {dev:.3g})")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """K(x, y) for two data rows, or two indices when ``spec`` is precomputed."""
    if spec.is_precomputed:
        n = spec.matrix.shape[0]
        i, j = int(x), int(y)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"index out of bounds for {n}x{n} kernel")
        return float(spec.matrix[i, j])
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if spec.kind == "gaussian":
        diff = x - y
        return float(np.exp(-np.dot(diff, diff) / spec.kappa))
    dot = float(np.dot(x, y))
    if spec.kind == "linear":
        return dot
    return float((dot + spec.coef0) ** spec.degree)


def _check_indices(idx, n):
    idx = np.asarray(idx, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index out of bounds for dataset of size {n}")
    return idx


def _analytic_block(spec, xr, xc, sq_r, sq_c, same=None):
    dot = xr @ xc.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "polynomial":
        dot += spec.coef0
        return dot ** spec.degree
    d2 = dot
    d2 *= -2.0
    d2 += sq_r[:, None]
    d2 += sq_c[None, :]
    np.maximum(d2, 0.0, out=d2)
    if same is not None:
        d2[same] = 0.0
    d2 *= -1.0 / spec.kappa
    return np.exp(d2, out=d2)


def gram_block(spec: KernelSpec, points, rows, cols) -> np.ndarray:
    """Kernel values for every (rows[i], cols[j]) pair."""
    if spec.is_precomputed:
        n = spec.matrix.shape[0]
        r, c = _check_indices(rows, n), _check_indices(cols, n)
        return spec.matrix[np.ix_(r, c)]
    return BoundKernel(spec, points).block(rows, cols)


def compute_gamma(spec: KernelSpec, points=None) -> float:
    """gamma = sqrt(max_x |K(x, x)|); exactly 1.0 for the Gaussian kernel."""
    if spec.is_precomputed:
        diag = np.diag(spec.matrix)
    else:
        if points is None or len(points) == 0:
            raise ValueError("gamma of an empty dataset is undefined")
        diag = BoundKernel(spec, points).diag()
    if diag.size == 0:
        raise ValueError("gamma of an empty dataset is undefined")
    return float(np.sqrt(np.max(np.abs(diag))))


def gamma_report(spec: KernelSpec, points=None) -> dict:
    """Both readings of gamma for possibly indefinite kernels.

    ``sqrt_max_diag`` is the feature-norm definition; ``sqrt_max_abs`` uses the
    largest entry anywhere in the matrix. They coincide for PSD kernels.
    """
    g = compute_gamma(spec, points)
    if spec.is_precomputed:
        max_abs = float(np.max(np.abs(spec.matrix)))
    else:
        bk = BoundKernel(spec, points)
        max_abs = 0.0
        for s in range(0, bk.n, 1024):
            blk = bk.block(np.arange(s, min(s + 1024, bk.n)), np.arange(bk.n))
            max_abs = max(max_abs, float(np.max(np.abs(blk))))
    return {"sqrt_max_diag": g, "sqrt_max_abs": float(np.sqrt(max_abs))}


def _gather(mat, rows, cols):
    """mat[rows][:, cols] for pre-validated indices, one row at a time so each
    source row stays in cache (and take skips bounds checks)."""
    if rows.size < 32 or cols.size < 256 or not mat.flags.c_contiguous:
        return mat[np.ix_(rows, cols)]
    out = np.empty((rows.size, cols.size), dtype=mat.dtype)
    for i, r in enumerate(rows):
        mat[r].take(cols, out=out[i], mode="wrap")
    return out


class BoundKernel:
    """A kernel bound to a dataset: cached norms, op counting, optional Gram.

    ``materialize=True`` builds the full n x n matrix once (O(n^2) memory);
    otherwise row blocks are computed on demand and kept in an LRU cache of at
    most ``cache_bytes``.
    """

    ROW_BLOCK = 1024
    BLOCK_ENTRIES = 1 << 23  # ~64 MB of float64 per row block

    @property
    def row_chunk(self) -> int:
        return max(1, min(self.ROW_BLOCK, self.BLOCK_ENTRIES // max(self.n, 1)))

    def fork(self) -> "BoundKernel":
        """Same kernel and shared read-only data, private counters and cache."""
        twin = object.__new__(BoundKernel)
        twin.__dict__.update(self.__dict__)
        twin.evals = 0
        twin._cache = OrderedDict()
        twin._cached_bytes = 0
        return twin

    def __init__(self, spec: KernelSpec, points=None, materialize=False, cache_bytes=0,
                 accel=True):
        self.spec = spec
        self.accel = accel and _accel.HAVE_NUMBA
        if spec.is_precomputed:
            self.n = spec.matrix.shape[0]
            self.points = None
            if points is not None and len(points) != self.n:
                raise ValueError("precomputed kernel size does not match dataset")
        else:
            if points is None:
                raise ValueError("analytic kernels need data points")
            self.points = np.ascontiguousarray(points, dtype=np.float64)
            if self.points.ndim != 2:
                raise ValueError("points must be an n x d matrix")
            self.n = self.points.shape[0]
            self._sq = np.einsum("ij,ij->i", self.points, self.points)
        self.evals = 0
        self.cache_bytes = int(cache_bytes)
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cached_bytes = 0
        self._diag = None
        self._gram = None
        if materialize:
            self._gram = self._build_gram()

    @property
    def materialized(self):
        return self._gram is not None or self.spec.is_precomputed

    @property
    def gram(self):
        """The full Gram matrix (materializing it if needed)."""
        if self.spec.is_precomputed:
            return self.spec.matrix
        if self._gram is None:
            self._gram = self._build_gram()
        return self._gram

    def _build_gram(self):
        out = np.empty((self.n, self.n))
        allc = np.arange(self.n)
        for s in range(0, self.n, self.row_chunk):
            rows = np.arange(s, min(s + self.row_chunk, self.n))
            out[rows] = self._compute(rows, allc)
        return out

    def _compute(self, rows, cols):
        if self.spec.is_precomputed:
            return _gather(self.spec.matrix, rows, cols)
        same = None
        if self.spec.kind == "gaussian":
            same = rows[:, None] == cols[None, :]
            if not same.any():
                same = None
        return _analytic_block(self.spec, self.points[rows], self.points[cols],
                               self._sq[rows], self._sq[cols], same)

    def block(self, rows, cols) -> np.ndarray:
        rows = _check_indices(rows, self.n)
        cols = _check_indices(cols, self.n)
        self.evals += rows.size * cols.size
        if self._gram is not None:
            return _gather(self._gram, rows, cols)
        return self._compute(rows, cols)

    def window_products(self, pts, members, base, ptr):
        """Batch-vs-window kernel sums for sorted unique ``pts``.

        Blocks are CSR slices ``ptr[q]:ptr[q+1]`` of (members, base). Returns
        (K(pts, pts), R) with R[i, q] = sum_p base[p] K(pts[i], members[p])
        over block q. One pass over the needed kernel entries.
        """
        pts = _check_indices(pts, self.n)
        members = _check_indices(members, self.n)
        base = np.ascontiguousarray(base, dtype=np.float64)
        ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        cols = np.concatenate([pts, np.setdiff1d(members, pts)])
        sorter = np.argsort(cols, kind="stable")
        pos = sorter[np.searchsorted(cols, members, sorter=sorter)]
        self.evals += pts.size * cols.size
        lead = pts.size
        r = np.empty((lead, ptr.size - 1))
        mat = self._gram if self._gram is not None else (
            self.spec.matrix if self.spec.is_precomputed else None)
        if (self.accel and mat is not None and mat.dtype == np.float64
                and mat.flags.c_contiguous):
            kk = np.empty((lead, lead))
            _accel.window_products(mat, pts, cols, pos, base, ptr, lead, r, kk)
            return kk, r
        kb = _gather(mat, pts, cols) if mat is not None else self._compute(pts, cols)
        kk = kb[:, :lead]
        proj = np.zeros((cols.size, ptr.size - 1))
        np.add.at(proj, (pos, np.repeat(np.arange(ptr.size - 1), np.diff(ptr))), base)
        # window members rarely reappear among pts: split the product
        r[:] = kb[:, lead:] @ proj[lead:]
        hit = np.flatnonzero(proj[:lead].any(axis=1))
        if hit.size:
            r += (proj[hit].T @ kk[hit]).T  # K(pts, pts) is symmetric
        return kk, r

    def rows(self, idx) -> np.ndarray:
        """K(idx, all points); whole Gram rows when the matrix is stored."""
        idx = _check_indices(idx, self.n)
        self.evals += idx.size * self.n
        if self._gram is not None:
            return self._gram[idx]
        if self.spec.is_precomputed:
            return self.spec.matrix[idx]
        return self._compute(idx, np.arange(self.n))

    def row_block(self, start, stop) -> np.ndarray:
        """Rows [start, stop) against all columns, through the LRU cache."""
        self.evals += (stop - start) * self.n
        if self._gram is not None or self.spec.is_precomputed:
            return self.gram[start:stop]
        hit = self._cache.get(start)
        if hit is not None and hit.shape[0] == stop - start:
            self._cache.move_to_end(start)
            return hit
        blk = self._compute(np.arange(start, stop), np.arange(self.n))
        if blk.nbytes <= self.cache_bytes:
            self._cache[start] = blk
            self._cached_bytes += blk.nbytes
            while self._cached_bytes > self.cache_bytes:
                _, old = self._cache.popitem(last=False)
                self._cached_bytes -= old.nbytes
        return blk

    def diag(self, idx=None) -> np.ndarray:
        if self._diag is None:
            if self.spec.is_precomputed:
                d = np.diag(self.spec.matrix).copy()
            elif self.spec.kind == "gaussian":
                d = np.ones(self.n)
            elif self.spec.kind == "linear":
                d = self._sq.copy()
            else:
                d = (self._sq + self.spec.coef0) ** self.spec.degree
            d.setflags(write=False)
            self._diag = d
        return self._diag if idx is None else self._diag[np.asarray(idx, dtype=np.intp)]

    def gamma(self) -> float:
        return float(np.sqrt(np.max(np.abs(self.diag()))))


def read_kkm1(path) -> np.ndarray:
    """Read the binary kernel format: b"KKM1", u64 n, n*n little-endian f64."""
    raw = Path(path).read_bytes()
    if raw[:4] != KKM1_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    (n,) = struct.unpack("<Q", raw[4:12])
    expected = 12 + 8 * n * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for n={n}, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f8", offset=12).reshape(n, n).astype(np.float64)


def write_kkm1(path, matrix) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("KKM1 stores square matrices only")
    with open(path, "wb") as fh:
        fh.write(KKM1_MAGIC)
        fh.write(struct.pack("<Q", m.shape[0]))
        fh.write(m.tobytes())


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: kernel CSV must hold a square matrix")
    return np.array(rows, dtype=np.float64)


def load_precomputed(path, label="precomputed") -> KernelSpec:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    m = read_kkm1(path) if magic == KKM1_MAGIC else read_matrix_csv(path)
    return KernelSpec.precomputed(m, label=label, params=(("file", path.name),))
