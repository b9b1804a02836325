"""Coverage with m=5, T=3 as the automaton depth N varies.

With N=1 a single penalty flips an action, so clauses rarely settle; deeper
automata keep two clauses per sub-pattern most of the time.
"""

import argparse

from tmxor import lab
from tmxor.core import XOR_FULL, MachineConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, nargs="+", default=[1, 2, 5, 20, 100])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2021)
    args = ap.parse_args()

    print("N,fraction_n_A>=2_and_n_B>=2,mean_n_A,mean_n_B,mean_empty,mean_other")
    for N in args.N:
        cfg = MachineConfig(m=5, T=3, s=10, N=N)
        spec = lab.ExperimentSpec(cfg, XOR_FULL, runs=args.runs, steps=args.steps, stride=0)
        rep = lab.run_experiment(spec, args.seed)
        means = rep.counts.mean(axis=0)
        print(f"{N},{rep.fraction_both(2):.3f}," + ",".join(f"{v:.2f}" for v in means), flush=True)


if __name__ == "__main__":
    main()
