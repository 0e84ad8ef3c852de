"""Sample empirical floors for K_pn, G_pn and compare them with a constants table.

    python3 scripts/estimate_constants.py --d 3 --orders 3 4 5 --samples 400
"""

import argparse
import itertools
import json

from mhd_certify.bilinear import estimate_constants
from mhd_certify.constants import default_table, load_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--cutoff", type=int, default=3)
    ap.add_argument("--orders", type=float, nargs="+", default=[3.0, 4.0, 5.0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--constants", help="table to compare against (default: shipped table)")
    ap.add_argument("--write", help="write a table of factor x floor to this JSON path")
    ap.add_argument("--factor", type=float, default=4.0)
    args = ap.parse_args()

    table = load_table(args.constants) if args.constants else default_table(args.d)
    rows = []
    print(f"{'p':>5} {'n':>5} {'K floor':>10} {'K table':>10} {'G floor':>10} {'G table':>10}")
    for n, p in itertools.combinations_with_replacement(sorted(args.orders), 2):
        if not n > args.d / 2:
            continue
        est = estimate_constants(p, n, args.d, args.cutoff, args.samples, args.seed)
        try:
            kt, gt = table.K(p, n), table.G(p, n)
        except ValueError:
            kt = gt = float("nan")
        g = est.G_lower if est.G_lower is not None else float("nan")
        print(f"{p:5.2f} {n:5.2f} {est.K_lower:10.4g} {kt:10.4g} {g:10.4g} {gt:10.4g}")
        if est.G_lower is not None:
            rows.append({"p": p, "n": n, "K": args.factor * est.K_lower, "G": args.factor * est.G_lower})
    if args.write:
        with open(args.write, "w") as fh:
            json.dump({"d": args.d, "entries": rows}, fh, indent=2)
        print(f"wrote {len(rows)} entries to {args.write}")


if __name__ == "__main__":
    main()
