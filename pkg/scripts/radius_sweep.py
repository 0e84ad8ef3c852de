"""Stability radius of scaled Beltrami bases as the base amplitude and order vary.

    python3 scripts/radius_sweep.py --scales 0.001 0.01 0.1 1 --orders 3 3.5 4 > radius.csv
"""

import argparse
import csv
import sys

from mhd_certify.beltrami import BeltramiPairSpec, analytic_budget, make_gb_pair
from mhd_certify.constants import default_table
from mhd_certify.stability import stability_radius


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=float, default=0.1)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--scales", type=float, nargs="+", default=[1e-3, 1e-2, 1e-1, 1.0])
    ap.add_argument("--orders", type=float, nargs="+", default=[3.0, 4.0])
    args = ap.parse_args()

    table = default_table(3)
    mu = min(args.nu, args.eta)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["scale", "n", "base_norm_n", "rho_n", "small_data_radius"])
    for s in args.scales:
        bp = make_gb_pair(BeltramiPairSpec("trkal", dict(alpha=3 * s, beta=4 * s, gamma=s, kappa=1, lam=2)), 2)
        for n in args.orders:
            budget = analytic_budget(bp, args.nu, args.eta, [n, n + 1])
            rho = stability_radius(budget, n, mu, table)
            out.writerow([s, n, f"{bp.pair.norm(n):.6e}", f"{rho:.6e}", f"{mu / table.G_hat(n):.6e}"])


if __name__ == "__main__":
    main()
