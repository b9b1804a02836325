"""Absorption probabilities of the two-clause XOR chain.

Prints, for a few starting configurations, the probability of ending in each
absorbing state, and how the squaring count changes with s.
"""

import argparse

from tmxor import dtmc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--s", type=float, nargs="+", default=[1.5, 2, 5, 10, 100])
    ap.add_argument("--T", type=int, default=1)
    args = ap.parse_args()

    starts = ["EEEE|EEEE", "IIII|IIII", "EIIE|EEEE", "IEEI|EEEE", "IEIE|EIEI"]
    for s in args.s:
        rep = dtmc.analyze(dtmc.build_two_clause_matrix(s=s, T=args.T))
        print(f"s={s:g} T={args.T}: absorbing={rep.absorbing} verdict={rep.verdict} "
              f"squarings={rep.iterations} residual={rep.residual:.1e}")
        for form in starts:
            i = dtmc.encode_state([1 if c == "I" else 0 for c in form.replace("|", "")])
            probs = " ".join(f"{a}:{rep.limiting[i - 1, a - 1]:.4f}" for a in rep.absorbing)
            print(f"  from {form} ({i:3d})  {probs}")


if __name__ == "__main__":
    main()
