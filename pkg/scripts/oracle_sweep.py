"""Closed form against both oracles on random instances.

One CSV row per instance: dimension, rates, region, closed-form risk, oracle
risk and the gap. The grid oracle is only run for n <= 4.
"""
import argparse
import csv
import sys
import time

import numpy as np

from fsprivacy import canonicalize, classify, oracle_descent, oracle_grid, solve, thresholds


def random_pmf(rng, n, floor=0.01):
    return floor + (1.0 - floor * n) * rng.dirichlet(np.ones(n))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--max-n", type=int, default=32)
    ap.add_argument("--resolution", type=float, default=0.005)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["oracle", "n", "rho", "sigma", "region", "closed_form", "oracle_risk", "gap", "seconds"])
    worst = {"grid": 0.0, "descent": 0.0}
    for _ in range(args.instances):
        for kind in ("grid", "descent"):
            n = int(rng.integers(2, 5 if kind == "grid" else args.max_n + 1))
            view = canonicalize(random_pmf(rng, n), random_pmf(rng, n))
            table = thresholds(view)
            rho, sigma = rng.uniform(0, 1.5 * table.rho_n), rng.uniform(0, table.sigma_1)
            exact = solve(view, rho, sigma).risk
            t0 = time.perf_counter()
            if kind == "grid":
                risk = oracle_grid(view, rho, sigma, args.resolution).risk
            else:
                risk = oracle_descent(view, rho, sigma, tol=1e-10).risk
            dt = time.perf_counter() - t0
            worst[kind] = max(worst[kind], abs(risk - exact))
            region = classify(table, rho, sigma).kind.value
            w.writerow([kind, n, repr(rho), repr(sigma), region, repr(exact), repr(risk), repr(risk - exact), f"{dt:.4f}"])
    if out is not sys.stdout:
        out.close()
    print(f"max |gap|: grid {worst['grid']:.3e} (bound {5 * args.resolution}), descent {worst['descent']:.3e}", file=sys.stderr)


if __name__ == "__main__":
    main()
