#!/usr/bin/env python3
"""Distance between truncated and untruncated centers along a paired run.

The untruncated centers replay the truncated run's batch partitions. Prints the
per-iteration maximum gap for a range of tau values next to eps/28.
"""
import argparse
import math

from kkmini import BoundKernel, KernelSpec, auto_tau, gen_blobs, kmeans_pp, make_rng, truncated_fit
from kkmini.oracle import PairedReplay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--b", type=int, default=256)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--tau", type=int, nargs="*", default=[50, 200, 1000])
    args = ap.parse_args()

    ds = gen_blobs(args.n, args.k, 2, 1.0, seed=0)
    kern = BoundKernel(KernelSpec.gaussian(10.0), ds.points, materialize=True)
    init = kmeans_pp(kern, args.k, make_rng(0))
    taus = args.tau + [auto_tau(args.b, kern.gamma(), args.eps)]
    print(f"eps/28 = {args.eps / 28:.5f}")
    for tau in taus:
        replay = PairedReplay(kern, init)
        truncated_fit(kern, init, args.b, tau, args.iters, make_rng(0), callback=replay)
        worst = max(replay.max_gaps)
        first = next((i + 1 for i, g in enumerate(replay.max_gaps) if g > 1e-12), None)
        print(f"tau={tau}: max gap {worst:.3e} (first above 1e-12 at iteration {first}), "
              f"log10 ratio to eps/28 {math.log10(max(worst, 1e-300) / (args.eps / 28)):.1f}")


if __name__ == "__main__":
    main()
