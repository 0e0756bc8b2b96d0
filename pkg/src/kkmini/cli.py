"""Command line entry point: ``kkmini run | summarize | gamma``."""
from __future__ import annotations

import argparse
import json
import sys
import typing
from dataclasses import fields

from . import harness
from .kernels import BoundKernel, gamma_report


def _flag_type(f):
    hint = typing.get_type_hints(harness.SolverConfig)[f.name]
    if hint is bool:
        return None
    if f.name == "radii":
        return lambda s: tuple(float(v) for v in s.split(","))
    if hint is int:
        return int
    if hint is float:
        return float
    return str  # str, optional or "int | str" fields: validated by the config


def _add_config_flags(p, names=None):
    for f in fields(harness.SolverConfig):
        if names is not None and f.name not in names:
            continue
        opts = [f"--{f.name}"]
        if "_" in f.name:
            opts.append(f"--{f.name.replace('_', '-')}")
        typ = _flag_type(f)
        if typ is None:
            p.add_argument(*opts, dest=f.name, action=argparse.BooleanOptionalAction,
                           default=argparse.SUPPRESS)
        else:
            p.add_argument(*opts, dest=f.name, type=typ, default=argparse.SUPPRESS)


def build_parser():
    ap = argparse.ArgumentParser(prog="kkmini", description="Kernel k-means experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run an experiment and append CSV rows")
    run.add_argument("--config", help="JSON config; flags override its fields")
    _add_config_flags(run)
    summ = sub.add_parser("summarize", help="aggregate result CSVs per configuration cell")
    summ.add_argument("csv", nargs="+")
    summ.add_argument("--out", help=".csv or .json; prints CSV to stdout if omitted")
    gam = sub.add_parser("gamma", help="print gamma for a dataset/kernel pair")
    _add_config_flags(gam, {"dataset", "label_column", "n", "data_k", "k", "d", "spread",
                            "radii", "noise", "data_seed", "kernel", "kappa", "degree",
                            "coef0", "knn", "heat_t", "heat_variant", "kernel_path"})
    return ap


def _config(args) -> harness.SolverConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in ("cmd", "config")}
    if getattr(args, "config", None):
        return harness.SolverConfig.from_json(args.config, overrides)
    return harness.SolverConfig.from_dict(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            reports = harness.run_experiment(_config(args))
            for r in reports:
                row = r.row()
                print(f"seed={row['seed']} iters={row['iters_run']} cost={r.final_cost:.6g} "
                      f"ari={r.ari:.4f} nmi={r.nmi:.4f} cluster_ms={r.cluster_ms:.1f}")
        elif args.cmd == "summarize":
            cells = harness.summarize(args.csv)
            harness.write_summary(cells, args.out)
        else:
            cfg = _config(args)
            ds = harness.load_dataset(cfg)
            spec = harness.build_kernel(cfg, ds)
            rep = gamma_report(spec, None if spec.is_precomputed else ds.points)
            rep.update(dataset=ds.name, kernel=spec.label, kernel_params=spec.describe(), n=ds.n)
            print(json.dumps(rep))
    except (harness.ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"kkmini: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
