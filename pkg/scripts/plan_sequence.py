"""Grow a straight-line design one point at a time, always picking a next
point from the admissible region, and confirm the variances never grow."""

import argparse

import numpy as np

from vrp_ols.decomposition import ols_covariance
from vrp_ols.model import line_design
from vrp_ols.planner import admissible_next_line


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=str, default="0.5,2.0,1.2")
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--width", type=float, default=3.0, help="half-width of the search window")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    h = [float(t) for t in args.start.split(",")]
    var = list(np.linspace(3.0, 2.0, len(h)))
    prev = np.diag(ols_covariance(line_design(h), var))
    print(f"start {h}: diag V = {prev.round(5).tolist()}")
    for step in range(args.steps):
        centre = float(np.mean(h))
        region = admissible_next_line(h, (centre - args.width, centre + args.width))
        if not region.intervals:
            print("no admissible point in the window")
            break
        lengths = np.array([b - a for a, b in region.intervals])
        a, b = region.intervals[rng.choice(len(lengths), p=lengths / lengths.sum())]
        x = float(rng.uniform(a, b))
        h.append(x)
        var.append(var[-1] * rng.uniform(0.7, 1.0))
        cur = np.diag(ols_covariance(line_design(h), var))
        tag = "ok" if np.all(cur <= prev * (1 + 1e-12)) else "INCREASED"
        ivs = ", ".join(f"[{a:.3f}, {b:.3f}]" for a, b in region.intervals)
        print(f"step {step + 1}: admissible {ivs} -> h_next {x:.4f}, diag V = {cur.round(5).tolist()} {tag}")
        prev = cur


if __name__ == "__main__":
    main()
