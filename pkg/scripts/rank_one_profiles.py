"""Rank-one Thom profile, delta and epsilon against their closed forms, written to CSV.

    python3 scripts/rank_one_profiles.py --t 1.0 --out rank_one.csv
"""

import argparse
import math
from fractions import Fraction

import numpy as np

from superform_lab.flat_bundle import constant_direction_germ, trivial_germ
from superform_lab.lattice import write_csv
from superform_lab.thom import alpha_profile, pull_delta, pull_epsilon


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--out", default="rank_one.csv")
    args = ap.parse_args()
    t = args.t
    g = constant_direction_germ([[Fraction(3, 4)]], 2, 2, exact=False)
    wf = g.dual().omega[0, 0].at_origin()
    w = wf.coefficient(1 << wf.sig.dx(0)).scalar_value().real
    z = trivial_germ(1, 2, 2, exact=False)
    rows = []
    for lam in np.linspace(-3, 3, 25):
        lam = float(lam)
        a = alpha_profile(t, lam)
        dl = pull_delta(g, [lam], t).value().at_origin()
        dcoef = complex(dl.coefficient(1 << dl.sig.dx(0)).scalar_value()).real if not dl.is_zero() else 0.0
        dref = -(0.25 - 0.5 * t * lam * lam) * math.exp(-t * lam * lam) * w
        ep = pull_epsilon(z, [lam], t).value().at_origin()
        e = complex(ep.scalar_value()).real if not ep.is_zero() else 0.0
        eref = (lam * lam / 2 - 1 / (4 * t)) * math.exp(-t * lam * lam)
        rows.append((lam, a, dcoef, dref, e, eref))
    write_csv(args.out, ["lambda", "alpha_dx", "delta_dx", "delta_closed_form", "epsilon", "epsilon_closed_form"],
              rows)
    worst = max(max(abs(r[2] - r[3]), abs(r[4] - r[5])) for r in rows)
    print(f"wrote {len(rows)} rows to {args.out}; worst closed-form deviation {worst:.2e}")


if __name__ == "__main__":
    main()
