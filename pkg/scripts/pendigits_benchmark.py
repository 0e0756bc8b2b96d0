#!/usr/bin/env python3
"""Speed/quality comparison on PenDigits through the harness.

Runs full-batch, mini-batch and truncated kernel k-means plus the Euclidean
baselines (10 repeats each) and writes rows to one CSV plus its summary.

    python scripts/pendigits_benchmark.py --out results/pendigits.csv
"""
import argparse
import os
from pathlib import Path

from kkmini.harness import SolverConfig, run_experiment, summarize, write_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/pendigits.csv")
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--b", type=int, nargs="+", default=[1024])
    ap.add_argument("--tau", type=int, nargs="+", default=[200])
    ap.add_argument("--skip-full", action="store_true", help="omit the O(n^2)-per-iteration solver")
    args = ap.parse_args()

    os.environ.setdefault("KKMINI_THREADS", "1")  # serial repeats keep wall times comparable
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    common = dict(dataset="pendigits", kernel="gaussian", kappa="auto", k=10, iters=args.iters,
                  repeats=args.repeats, materialize_gram=True, out=args.out)
    runs = [] if args.skip_full else [dict(algo="full")]
    runs += [dict(algo="euclid_lloyd")]
    for b in args.b:
        for lr in ("sqrt", "count"):
            runs += [dict(algo="minibatch", b=b, lr=lr), dict(algo="euclid_minibatch", b=b, lr=lr)]
            runs += [dict(algo="truncated", b=b, tau=t, lr=lr) for t in args.tau]
    for extra in runs:
        reports = run_experiment(SolverConfig(**common, **extra))
        ms = sum(r.cluster_ms for r in reports) / len(reports)
        ari = sum(r.ari for r in reports) / len(reports)
        print(f"{extra}: mean cluster {ms:.0f} ms, mean ARI {ari:.3f}")
    write_summary(summarize([args.out]), Path(args.out).with_name(Path(args.out).stem + "_summary.csv"))


if __name__ == "__main__":
    main()
