"""Recovery on the semi-line: the three exact laws and their samples.

Walks through the tail-run law, the complete-recovery probabilities
and the reaching-time LLN on the half-infinite path, printing each
exact value next to a seeded Monte Carlo estimate.

    python3 demos/semiline_recovery.py --reps 20000 --seed 11
"""

import argparse
import math

from fpp_recovery import exact
from fpp_recovery.experiments import (
    estimate_complete_recovery,
    estimate_tail_law,
    growth_report,
)
from fpp_recovery.engine import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    print("= tail-run law, gamma=%g" % args.gamma)
    print("  P(run >= m) = 1/prod(1 + k*gamma); at gamma=1 that is 1/m!")
    rep = estimate_tail_law(args.gamma, 40, 6, args.reps, args.seed)
    print("  %2s %12s %12s %8s" % ("m", "exact", "estimate", "sigmas"))
    for est, orc in zip(rep.estimates, rep.oracles):
        m = est.label.split(">=")[1].rstrip(")")
        sig = (abs(est.point - orc.exact) / est.stderr
               if est.stderr > 0 else 0.0)
        print("  %2s %12.6g %12.6g %8.2f" % (m, orc.exact, est.point, sig))
    print("  verdict:", "pass" if rep.verdict else "fail")

    print()
    print("= complete recovery by the (n+1)-th activation")
    print("  nu_n -> exp(-1/gamma) = %.6f"
          % exact.nu_limit(args.gamma))
    for n in (2, 5, 10, 25):
        nu = exact.nu_n(n, args.gamma)
        rep = estimate_complete_recovery(args.gamma, n,
                                         max(2000, args.reps // 4),
                                         args.seed + n)
        print("  n=%-3d exact %.6f  mc %.6f +- %.4f" %
              (n, nu.value, rep.estimates[0].point, rep.estimates[0].stderr))

    print()
    print("= reaching times: theta_n/n concentrates at 1")
    cfg = RunConfig(graph="semiline", gamma=args.gamma, t_max=1.0)
    rep = growth_report(cfg, (100, 1000), (50.0,), reps=200,
                        seed=args.seed + 99)
    for est in rep.estimates:
        if est.label.startswith("theta/n"):
            print("  median %s = %.4f" % (est.label, est.point))
    print("  boundary stays at 1: every activation consumes the single"
          " open slot and opens the next")


if __name__ == "__main__":
    main()
