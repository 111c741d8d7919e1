"""Anatomy of one replication: event log, snapshots, jump chain.

Runs a single seeded replication, dumps the first activations, then
reads the red/black state at a few times and the semi-line red-count
chain.  Good starting point for poking at the raw data structures.

    python3 demos/single_run_anatomy.py --graph bin:2:0.8 --t-max 4
"""

import argparse

from fpp_recovery.engine import (
    RunConfig,
    jump_chain,
    run_replication,
    snapshot,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--graph", default="semiline")
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--t-max", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    cfg = RunConfig(graph=args.graph, gamma=args.gamma, t_max=args.t_max,
                    seed=args.seed)
    log = run_replication(cfg)
    print("= %s gamma=%g seed=%d: %d vertices by t=%g%s"
          % (args.graph, args.gamma, args.seed, log.parent.size,
             args.t_max, " (extinct)" if log.extinct else ""))

    print()
    print("  first activations (id, parent, depth, tau, recovery)")
    for i in range(min(10, log.parent.size)):
        print("  %4d %6d %5d %8.4f %8.4f"
              % (i, log.parent[i], log.depth[i], log.tau[i],
                 log.recovery[i]))

    print()
    print("  %6s %9s %5s %9s %4s %4s" % ("t", "occupied", "red",
                                         "boundary", "H", "M"))
    steps = 6
    for k in range(1, steps + 1):
        t = args.t_max * k / steps
        sn = snapshot(log, t)
        print("  %6.2f %9d %5d %9d %4d %4d"
              % (t, sn.occupied.size, sn.red.size, sn.boundary_size,
                 sn.h, sn.m_cluster))

    if cfg.graph.kind == "semiline":
        print()
        chain = jump_chain(log)
        print("  red-count chain (first 14 jumps):")
        print("  sigma:", " ".join("%.3f" % s for s in chain.sigma[:14]))
        print("  w:    ", " ".join("%5d" % w for w in chain.w[:14]))
        print("  up-moves are activations (prob 1/(1+gamma*w)), "
              "down-moves recoveries")


if __name__ == "__main__":
    main()
