"""Fock supertrace against the Berezin integral with the sin(M)/M and sinh(GM)/GM prefactors.

    python3 scripts/bridge_prefactor.py --n 2 --seeds 1 2
"""

import argparse

from superform_lab.superconnection import bridge_identity_check, random_bridge_inputs


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--base-dim", type=int, default=None)
    args = ap.parse_args()
    print(f"{'seed':>4} {'blocks':>7} {'literal':>14} {'signed':>14}")
    for seed in args.seeds:
        for blocks in ("cross", "all"):
            M, J = random_bridge_inputs(args.n, seed, True, m=args.base_dim, blocks=blocks)
            lit = bridge_identity_check(args.n, M, J, factor="literal").residual
            sig = bridge_identity_check(args.n, M, J, factor="signed").residual
            print(f"{seed:>4} {blocks:>7} {str(lit):>14} {str(sig):>14}", flush=True)


if __name__ == "__main__":
    main()
