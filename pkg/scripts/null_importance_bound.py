"""Frequency with which a null variable's inclusion importance exceeds 1/2 + delta.

    python3 scripts/null_importance_bound.py --n 250 --p 8 --runs 500 --delta 0.1667
"""

import argparse

from mscs.simulate import ScenarioSpec, ii_null_bound_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--delta", type=float, default=1 / 6)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    spec = ScenarioSpec(1, 1, n=args.n, p=args.p, seed=args.seed, runs=args.runs)
    rep = ii_null_bound_check(spec, delta=args.delta, alpha=args.alpha)
    print(f"bound {rep.bound:.4f} over {rep.runs} runs")
    for row in rep.rows():
        print(f"x{row['feature']}: {row['exceed_prob']:.3f} +- {row['se']:.3f}  within bound: {row['within_bound']}")


if __name__ == "__main__":
    main()
