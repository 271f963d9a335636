"""Distance of the torsion integrand pieces from their t -> 0 limits, per decade of t.

Shows the linear approach: the residual drops by about ten per decade.

    python3 scripts/torsion_small_t.py
"""

import argparse

from superform_lab.superconnection import limit_checks, split_complex, two_term_complex


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--ts", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4])
    args = ap.parse_args()
    for name, cx in (("two-term", two_term_complex()), ("split", split_complex())):
        for t in args.ts:
            res = {c.check_id.split("/")[1]: c.residual for c in limit_checks(cx, t_small=t)
                   if "small" in c.check_id and not c.informational}
            shown = "  ".join(f"{k}={v:.3e}" for k, v in sorted(res.items()))
            print(f"{name:>9} t={t:.0e}  {shown}", flush=True)


if __name__ == "__main__":
    main()
