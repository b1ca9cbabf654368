"""Random search for designs where one more observation increases a coefficient variance."""

import argparse
from collections import Counter

from vrp_ols.simulate import SearchConfig, search_counterexamples


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=40)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--show", type=int, default=3, help="records to print per mode")
    args = ap.parse_args()

    modes = ["increasing", "two-point", "unrestricted"] if args.k == 2 else ["unrestricted"]
    for mode in modes:
        cfg = SearchConfig(n=args.n, n_max=args.n_max, k=args.k, trials=args.trials, seed=args.seed, mode=mode)
        recs = search_counterexamples(cfg)
        counts = Counter(r.category for r in recs)
        print(f"{mode:>12}: {len(recs)} of {args.trials} trials lose the property {dict(counts)}")
        for r in recs[: args.show]:
            pts = r.design[:, -1] if r.design.shape[1] == 2 else r.design
            print(f"    trial {r.trial}: points {pts.round(3).tolist()} coordinates {list(r.violating)}")


if __name__ == "__main__":
    main()
