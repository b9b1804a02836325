"""Distribution of the first step at which both sub-patterns reach T clauses."""

import argparse

import numpy as np

from tmxor import lab
from tmxor.core import XOR_FULL, MachineConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--T", type=int, default=2)
    ap.add_argument("--s", type=float, default=10.0)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2021)
    args = ap.parse_args()

    cfg = MachineConfig(m=args.m, T=args.T, s=args.s, N=args.N)
    spec = lab.ExperimentSpec(cfg, XOR_FULL, runs=args.runs, steps=args.steps, stride=0)
    times = lab.time_to_threshold(spec, args.seed)
    hits = np.asarray(times.hits())
    print(f"m={args.m} T={args.T} s={args.s:g} N={args.N}: hit {times.fraction_hit:.3f}, censored {times.censored}")
    if hits.size:
        q = np.percentile(hits, [10, 50, 90, 99])
        print("steps to threshold  p10={:.0f} p50={:.0f} p90={:.0f} p99={:.0f} max={}".format(*q, hits.max()))


if __name__ == "__main__":
    main()
