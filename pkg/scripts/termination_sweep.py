#!/usr/bin/env python3
"""Iterations until early stopping as a function of epsilon.

Batch size follows b = ceil(c * eps^-2 * ln^2(gamma n / eps)); prints mean
iteration counts and the smallest C with iterations <= C / eps.
"""
import argparse
import math

import numpy as np

from kkmini import BoundKernel, KernelSpec, gen_blobs, kmeans_pp, make_rng, minibatch_fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--kappa", type=float, default=10.0)
    ap.add_argument("--c", type=float, default=0.05)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    ds = gen_blobs(args.n, args.k, 2, 1.0, seed=0)
    kern = BoundKernel(KernelSpec.gaussian(args.kappa), ds.points, materialize=True)
    gamma = kern.gamma()
    fitted = 0.0
    print("eps,b,mean_iters,max_iters")
    for eps in args.eps:
        b = math.ceil(args.c * eps ** -2 * math.log(gamma * args.n / eps) ** 2)
        its = [minibatch_fit(kern, kmeans_pp(kern, args.k, make_rng(s)), b, 10_000, make_rng(s), epsilon=eps).n_iter
               for s in range(args.seeds)]
        fitted = max(fitted, max(its) * eps / gamma ** 2)
        print(f"{eps},{b},{np.mean(its):.2f},{max(its)}")
    print(f"fitted C = {fitted:.3f}")


if __name__ == "__main__":
    main()
