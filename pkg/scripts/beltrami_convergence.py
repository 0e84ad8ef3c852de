"""Time-step convergence of the integrator.

Beltrami data: the nonlinear term vanishes, so the error against the closed
form should sit at roundoff for every dt.  Random data: errors against a
fine-step reference should fall by about 16 per halving.

    python3 scripts/beltrami_convergence.py
"""

import argparse
import math

from mhd_certify.beltrami import BeltramiPairSpec, exact_solution, make_gb_pair
from mhd_certify.integrator import SolverConfig, integrate
from mhd_certify.spectral import FieldPair, pair_norm, random_field


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=float, default=0.1)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--cutoff", type=int, default=2)
    ap.add_argument("--amplitude", type=float, default=2.0)
    args = ap.parse_args()
    steps = [1 / 10, 1 / 20, 1 / 40, 1 / 80]

    bp = make_gb_pair(BeltramiPairSpec("trkal", dict(alpha=3, beta=4, gamma=1, kappa=1, lam=2)), args.cutoff)
    ref = exact_solution(bp, args.nu, args.eta, args.t_end)
    print("Beltrami pair vs closed form")
    for dt in steps:
        s = integrate(bp.pair, SolverConfig(args.nu, args.eta, dt, args.t_end, args.cutoff)).states[-1]
        print(f"  dt {dt:8.5f}  rel err {pair_norm(s - ref, 0) / pair_norm(ref, 0):.3e}")

    pair0 = FieldPair(random_field(1, 3, args.cutoff, amplitude=args.amplitude),
                      random_field(2, 3, args.cutoff, amplitude=args.amplitude))
    fine = integrate(pair0, SolverConfig(args.nu, args.eta, steps[-1] / 8, args.t_end, args.cutoff)).states[-1]
    print("random datum vs fine-step reference")
    prev = None
    for dt in steps:
        s = integrate(pair0, SolverConfig(args.nu, args.eta, dt, args.t_end, args.cutoff)).states[-1]
        err = pair_norm(s - fine, 0)
        order = f"  order {math.log2(prev / err):.2f}" if prev else ""
        print(f"  dt {dt:8.5f}  err {err:.3e}{order}")
        prev = err


if __name__ == "__main__":
    main()
