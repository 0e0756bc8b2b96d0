"""Experiment runner: configs, seeded repeats, timing and CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import euclidean_lloyd, euclidean_minibatch
from .data import Dataset, build_heat_kernel, build_knn_kernel, gen_blobs, gen_circles, load_csv
from .full_batch import full_batch_fit
from .kernels import BoundKernel, KernelSpec, load_precomputed
from .metrics import ari, nmi
from .minibatch import minibatch_fit
from .oracle import PairedReplay
from .seeding import init_centers, make_rng
from .truncated import SELF_IP_MODES, auto_tau, truncated_fit

ALGOS = ("full", "minibatch", "truncated", "euclid_lloyd", "euclid_minibatch")
BATCH_ALGOS = ("minibatch", "truncated", "euclid_minibatch")
KERNELS = ("gaussian", "linear", "polynomial", "knn", "heat", "precomputed")
CSV_COLUMNS = ("dataset", "algo", "kernel", "kernel_params", "k", "b", "tau", "epsilon", "lr",
               "seed", "iters_run", "kernel_build_ms", "cluster_ms", "final_cost", "ari", "nmi")
GROUP_KEY = ("dataset", "algo", "kernel", "b", "tau", "lr")
METRICS = ("iters_run", "kernel_build_ms", "cluster_ms", "final_cost", "ari", "nmi")
KAPPA_SAMPLE = 1000


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    """One experiment cell. Every field is also a CLI flag of the same name."""

    # data: "pendigits", "blobs", "circles" or a CSV path
    dataset: str = "blobs"
    label_column: str | None = None
    n: int = 2000
    data_k: int | None = None  # blob components; defaults to k
    d: int = 2
    spread: float = 1.0
    radii: tuple = (1.0, 3.0)
    noise: float = 0.05
    data_seed: int = 0
    # kernel
    kernel: str = "gaussian"
    kappa: float | str = "auto"
    degree: int = 2
    coef0: float = 1.0
    knn: int = 10
    heat_t: float = 1.0
    heat_variant: str = "adjacency"
    kernel_path: str | None = None
    materialize_gram: bool = False
    cache_mb: float = 256.0
    # solver
    algo: str = "truncated"
    k: int = 10
    b: int = 1024
    tau: int | str = 200
    epsilon: float = 0.0
    literal_stop: bool = False
    iters: int = 200
    lr: str = "sqrt"
    init: str = "kpp"
    self_ip_mode: str = "full"
    stop_at_fixed_point: bool = False
    oracle_check: bool = False
    # protocol
    seed: int = 0
    repeats: int = 1
    out: str = "results.csv"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.algo in BATCH_ALGOS and self.b < 1:
            raise ConfigError("b must be >= 1 for batch algorithms")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if self.lr not in ("sqrt", "count"):
            raise ConfigError("lr must be 'sqrt' or 'count'")
        if self.init not in ("kpp", "kmeans++", "uniform"):
            raise ConfigError("init must be 'kpp' or 'uniform'")
        if self.self_ip_mode not in SELF_IP_MODES:
            raise ConfigError(f"self_ip_mode must be one of {SELF_IP_MODES}")
        if self.heat_variant not in ("adjacency", "laplacian"):
            raise ConfigError("heat_variant must be 'adjacency' or 'laplacian'")
        if self.tau != "auto":
            try:
                self.tau = int(self.tau)
            except (TypeError, ValueError):
                raise ConfigError(f"tau must be an integer or 'auto', got {self.tau!r}") from None
            if self.tau < 1:
                raise ConfigError("tau must be >= 1")
        elif self.algo == "truncated" and not self.epsilon > 0:
            raise ConfigError("tau='auto' needs epsilon > 0")
        if self.kappa != "auto":
            try:
                self.kappa = float(self.kappa)
            except (TypeError, ValueError):
                raise ConfigError(f"kappa must be a number or 'auto', got {self.kappa!r}") from None
            if not self.kappa > 0:
                raise ConfigError("kappa must be > 0")
        if self.kernel == "precomputed" and not self.kernel_path:
            raise ConfigError("kernel=precomputed needs kernel_path")
        self.radii = tuple(float(r) for r in self.radii)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "SolverConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        d.update(overrides or {})
        return cls.from_dict(d)


@dataclass
class RunReport:
    config: dict
    seed: int
    iters_run: int
    kernel_build_ms: float
    cluster_ms: float
    final_cost: float
    ari: float
    nmi: float
    tau: int | None
    labels: list = field(repr=False, default_factory=list)
    iter_times: list = field(repr=False, default_factory=list)
    batch_objectives: list = field(repr=False, default_factory=list)
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        c = self.config
        euclid = c["algo"].startswith("euclid")
        return {
            "dataset": c["dataset"],
            "algo": c["algo"],
            "kernel": "euclidean" if euclid else c["kernel"],
            "kernel_params": "" if euclid else c.get("kernel_params", ""),
            "k": c["k"],
            "b": c["b"] if c["algo"] in BATCH_ALGOS else "",
            "tau": self.tau if self.tau is not None else "",
            "epsilon": _fmt(c["epsilon"]),
            "lr": c["lr"] if c["algo"] in BATCH_ALGOS else "",
            "seed": self.seed,
            "iters_run": self.iters_run,
            "kernel_build_ms": f"{self.kernel_build_ms:.3f}",
            "cluster_ms": f"{self.cluster_ms:.3f}",
            "final_cost": _fmt(self.final_cost),
            "ari": _fmt(self.ari),
            "nmi": _fmt(self.nmi),
        }


def _fmt(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------- data

def data_dir() -> Path:
    env = os.environ.get("KKMINI_DATA")
    return Path(env) if env else Path.cwd() / "data"


def load_dataset(cfg: SolverConfig) -> Dataset:
    name = cfg.dataset
    if name == "blobs":
        return gen_blobs(cfg.n, cfg.data_k or cfg.k, cfg.d, cfg.spread, cfg.data_seed)
    if name == "circles":
        return gen_circles(cfg.n, cfg.radii, cfg.noise, cfg.data_seed)
    if name == "pendigits":
        path = data_dir() / "pendigits.csv"
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; run scripts/prepare_pendigits.py first")
        return load_csv(path, cfg.label_column or "digit", name="pendigits")
    path = Path(name)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {name}")
    return load_csv(path, cfg.label_column, name=path.stem)


def median_sq_distance(points, sample=KAPPA_SAMPLE) -> float:
    """Median pairwise squared distance over a fixed-seed subsample."""
    x = np.asarray(points, dtype=np.float64)
    if len(x) > sample:
        x = x[make_rng(0).choice(len(x), size=sample, replace=False)]
    sq = np.einsum("ij,ij->i", x, x)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    vals = d2[np.triu_indices(len(x), 1)]
    med = float(np.median(vals)) if vals.size else 0.0
    return med if med > 0 else 1.0


def build_kernel(cfg: SolverConfig, ds: Dataset) -> KernelSpec:
    kind = cfg.kernel
    if kind == "gaussian":
        kappa = median_sq_distance(ds.points) if cfg.kappa == "auto" else cfg.kappa
        return KernelSpec.gaussian(kappa)
    if kind == "linear":
        return KernelSpec.linear()
    if kind == "polynomial":
        return KernelSpec.polynomial(cfg.degree, cfg.coef0)
    if kind == "knn":
        return build_knn_kernel(ds, cfg.knn)
    if kind == "heat":
        return build_heat_kernel(ds, cfg.knn, cfg.heat_t, variant=cfg.heat_variant)
    spec = load_precomputed(cfg.kernel_path)
    if spec.matrix.shape[0] != ds.n:
        raise ConfigError(f"kernel matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]} "
                          f"but the dataset has {ds.n} points")
    return spec


# ------------------------------------------------------------------ running

def resolve_tau(cfg: SolverConfig, kern) -> int | None:
    if cfg.algo != "truncated":
        return None
    if cfg.tau == "auto":
        return auto_tau(cfg.b, kern.gamma(), cfg.epsilon)
    return int(cfg.tau)


def run_one(cfg: SolverConfig, ds: Dataset, kern, seed: int, build_ms: float) -> RunReport:
    """One seeded repeat. ``kern`` is private to this call (see BoundKernel.fork)."""
    rng = make_rng(seed)
    tau = resolve_tau(cfg, kern)
    eps = cfg.epsilon if cfg.epsilon > 0 else None
    extra = {}
    t0 = time.perf_counter()
    if cfg.algo.startswith("euclid"):
        lin = BoundKernel(KernelSpec.linear(), ds.points)
        init = ds.points[[int(c.indices[0]) for c in init_centers(cfg.init, lin, cfg.k, rng)]]
        if cfg.algo == "euclid_lloyd":
            res = euclidean_lloyd(ds.points, init, max_iters=cfg.iters, exact=False,
                                  stop_at_fixed_point=cfg.stop_at_fixed_point)
        else:
            res = euclidean_minibatch(ds.points, init, cfg.b, cfg.iters, rng, lr=cfg.lr,
                                      epsilon=eps, literal_stop=cfg.literal_stop)
    else:
        init = init_centers(cfg.init, kern, cfg.k, rng)
        if cfg.algo == "full":
            res = full_batch_fit(kern, init, max_iters=cfg.iters,
                                 stop_at_fixed_point=cfg.stop_at_fixed_point)
        elif cfg.algo == "minibatch":
            res = minibatch_fit(kern, init, cfg.b, cfg.iters, rng, lr=cfg.lr, epsilon=eps,
                                literal_stop=cfg.literal_stop)
        else:
            replay = PairedReplay(kern, init) if cfg.oracle_check else None
            res = truncated_fit(kern, init, cfg.b, tau, cfg.iters, rng, lr=cfg.lr, epsilon=eps,
                                literal_stop=cfg.literal_stop, self_ip_mode=cfg.self_ip_mode,
                                callback=replay)
            if replay is not None:
                extra["max_center_gap"] = max(replay.max_gaps, default=0.0)
    cluster_ms = (time.perf_counter() - t0) * 1e3
    truth = ds.labels
    return RunReport(
        config=config_echo(cfg, kern), seed=seed, iters_run=res.n_iter,
        kernel_build_ms=build_ms, cluster_ms=cluster_ms, final_cost=res.cost,
        ari=ari(res.labels, truth) if truth is not None else math.nan,
        nmi=nmi(res.labels, truth) if truth is not None else math.nan,
        tau=tau, labels=res.labels.tolist(), iter_times=list(res.iter_times),
        batch_objectives=[float(v) for v in res.batch_objectives], extra=extra)


def config_echo(cfg: SolverConfig, kern=None) -> dict:
    d = asdict(cfg)
    d["radii"] = list(cfg.radii)
    if kern is not None:
        d["kernel_params"] = kern.spec.describe()
    return d


def thread_cap(repeats: int) -> int:
    env = os.environ.get("KKMINI_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, repeats))


def run_experiment(cfg: SolverConfig, write: bool = True) -> list[RunReport]:
    """All repeats of ``cfg``; repeat r uses seed cfg.seed + r.

    The kernel is built once (timed as kernel_build_ms, shared by the repeats).
    Rows are appended to cfg.out in one write; a JSON document with per-iteration
    traces goes next to it (same stem, .json).
    """
    cfg.validate()
    ds = load_dataset(cfg)
    if ds.n < cfg.k:
        raise ConfigError(f"k={cfg.k} exceeds dataset size {ds.n}")
    t0 = time.perf_counter()
    if cfg.algo.startswith("euclid"):
        kern = BoundKernel(KernelSpec.linear(), ds.points)
    else:
        spec = build_kernel(cfg, ds)
        kern = BoundKernel(spec, ds.points if not spec.is_precomputed else None,
                           materialize=cfg.materialize_gram and not spec.is_precomputed,
                           cache_bytes=int(cfg.cache_mb * 2**20))
    kern.diag()
    build_ms = (time.perf_counter() - t0) * 1e3

    seeds = [cfg.seed + r for r in range(cfg.repeats)]
    workers = thread_cap(cfg.repeats)
    if workers == 1:
        reports = [run_one(cfg, ds, kern.fork(), s, build_ms) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda s: run_one(cfg, ds, kern.fork(), s, build_ms), seeds))
    if write:
        append_rows(cfg.out, [r.row() for r in reports])
        write_json(Path(cfg.out).with_suffix(".json"), cfg, kern, reports)
    return reports


_write_lock = threading.Lock()


def append_rows(path, rows: list[dict]) -> None:
    """Append rows (header first if the file is new) with a single write."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    with _write_lock:
        new = not path.exists() or path.stat().st_size == 0
        if not new:
            with open(path, newline="") as fh:
                header = next(csv.reader(fh), [])
            if tuple(header) != CSV_COLUMNS:
                raise ConfigError(f"{path}: existing file has a different column layout")
        else:
            w.writeheader()
        w.writerows(rows)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        try:
            os.write(fd, buf.getvalue().encode())
        finally:
            os.close(fd)


def write_json(path, cfg, kern, reports) -> None:
    doc = {
        "config": config_echo(cfg, kern),
        "runs": [{**r.row(), "labels": r.labels, "iter_times": r.iter_times,
                  "batch_objectives": r.batch_objectives, **r.extra} for r in reports],
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc))
    os.replace(tmp, path)


# ---------------------------------------------------------------- summaries

def read_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        with open(p, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ConfigError(f"{p}: unexpected columns {reader.fieldnames}")
            rows.extend(reader)
    return rows


def summarize(paths) -> list[dict]:
    """Mean and sample std (n - 1; 0 for a single row) per configuration cell."""
    groups: dict[tuple, list[dict]] = {}
    for r in read_rows(paths):
        groups.setdefault(tuple(r[c] for c in GROUP_KEY), []).append(r)
    out = []
    for key, rows in groups.items():
        cell = dict(zip(GROUP_KEY, key))
        cell["runs"] = len(rows)
        for m in METRICS:
            vals = [float(r[m]) for r in rows]
            cell[f"{m}_mean"] = statistics.fmean(vals)
            cell[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(cell)
    return out


def write_summary(cells: list[dict], path=None) -> None:
    """CSV (or JSON for a .json path); stdout when ``path`` is None."""
    if path is not None and Path(path).suffix == ".json":
        Path(path).write_text(json.dumps(cells, indent=1))
        return
    cols = list(GROUP_KEY) + ["runs"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(cells)
    finally:
        if fh is not sys.stdout:
            fh.close()
