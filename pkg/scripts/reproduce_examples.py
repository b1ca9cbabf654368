"""Recompute the three worked examples shipped in data/ and print the key matrices."""

import argparse
from pathlib import Path

import numpy as np

from vrp_ols.cli import load_problem
from vrp_ols.decomposition import decompose, decompose_correlated
from vrp_ols.matrixcore import sym_eigenvalues
from vrp_ols.straightline import check_conditions

DATA = Path(__file__).resolve().parent.parent / "data"


def show(name, m):
    print(f"  {name}:")
    for row in np.atleast_2d(m):
        print("    " + "  ".join(f"{v: .6f}" for v in row))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path, default=DATA)
    args = ap.parse_args()
    np.set_printoptions(precision=6, suppress=True)

    spec = load_problem(args.data / "indefinite_w11.json")
    dec = decompose(spec.augmented())
    print("indefinite: heteroscedastic, diagonal noise")
    show("W11", dec.w11)
    print(f"  eigenvalues of W11: {sym_eigenvalues(dec.w11)}")
    print(f"  diag(V00 - V11): {np.diag(dec.reduction)}")

    spec = load_problem(args.data / "correlated.json")
    dec = decompose_correlated(spec.augmented())
    print("correlated: correlated noise")
    show("V00 - V11", dec.reduction)
    print(f"  closed-form W22 defect: {dec.w22_defect:.2e}")

    spec = load_problem(args.data / "backstep.json")
    dec = decompose(spec.augmented())
    rep = check_conditions(spec.line_h, spec.next_h)
    print("backstep: next point below the last one")
    show("V00 - V11", dec.reduction)
    print(f"  failing conditions: {rep.failing()}, C4 witness (family, m): {rep.witnesses['C4']}")


if __name__ == "__main__":
    main()
