"""Rank-three Gaussian pairing integral against (1/2) Tr V^2, generic V and V = A^2.

    python3 scripts/pairing_trace_rank3.py --seeds 1 2 3
"""

import argparse
from fractions import Fraction

from superform_lab.grassmann import gaussian
from superform_lab.identities import pairing_integral, random_lemma_inputs, random_symmetric_one_forms


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    args = ap.parse_args()
    print(f"{'seed':>4} {'|integral|':>12} {'integral - Tr V^2/2':>20} {'A^2 integral zero':>18}")
    for seed in args.seeds:
        V, _ = random_lemma_inputs(3, seed)
        val = pairing_integral(V)
        half = (V @ V).trace().scale(gaussian(Fraction(1, 2)))
        diff = val - half.lift(val.sig)
        A = random_symmetric_one_forms(3, seed)
        sq_zero = pairing_integral(A @ A).is_zero()
        print(f"{seed:>4} {val.max_abs():>12.4g} {'exact zero' if diff.is_zero() else diff.max_abs():>20} "
              f"{str(sq_zero):>18}", flush=True)


if __name__ == "__main__":
    main()
