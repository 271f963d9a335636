"""phi(s) by t-quadrature and by the lattice series over a grid of s < 0, written to CSV.

    python3 scripts/phi_scan.py --s -2.5 -3 -4 -5 --out phi_scan.csv
"""

import argparse

from superform_lab.flat_bundle import random_germ
from superform_lab.lattice import phi_compare_check, phi_setup, write_csv


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--s", type=float, nargs="+", default=[-2.5, -3.0, -4.0, -5.0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="phi_scan.csv")
    args = ap.parse_args()
    g = random_germ(3, 5, 1, seed=args.seed, exact=True, unimodular=False, identity_at_origin=True)
    setup = phi_setup(g)
    rows = []
    for s in args.s:
        c = phi_compare_check(g, s, setup=setup)
        rows.append((s, c.detail["max_coefficient"], c.residual, c.detail["series_tail"], c.detail["nodes"]))
        print(f"s={s:+.2f}  max|phi|={rows[-1][1]:.6g}  relative difference={c.residual:.3e}", flush=True)
    write_csv(args.out, ["s", "max_coefficient", "relative_difference", "series_tail", "nodes"], rows)


if __name__ == "__main__":
    main()
