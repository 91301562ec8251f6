"""Per-request ABS solve time against the iteration budget.

    python3 scripts/scaling.py --iters 10 20 40 --out results/scaling.json
"""
import argparse
import json
import statistics
import time

import numpy as np

from cpn_sem.model import generate_random_cpn, generate_service_entity
from cpn_sem.routing import PathTable
from cpn_sem.search import AbsSolver, SearchParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, nargs="+", default=[10, 20, 40])
    ap.add_argument("--requests", type=int, default=10)
    ap.add_argument("--swarm", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    topo = generate_random_cpn(30, 60, (100, 150), (100, 150), seed=args.seed)
    table = PathTable(topo, 5)
    entities = [generate_service_entity((5, 15), 0.5, (1, 20), seed=1000 * args.seed + i,
                                        bw_range=(1, 20)) for i in range(args.requests)]
    medians = []
    for it in args.iters:
        solver = AbsSolver(table, SearchParams(max_iters=it, swarm_size=args.swarm,
                                               seed=args.seed, deterministic_mode=True))
        times = []
        for e in entities:
            t0 = time.process_time()
            solver.solve(e, topo)
            times.append(time.process_time() - t0)
        medians.append(statistics.median(times))
        print(f"iters={it:4d} median={medians[-1]:.3f}s", flush=True)
    x, y = np.log(args.iters), np.log(medians)
    slope, icpt = np.polyfit(x, y, 1)
    r2 = 1 - np.sum((y - (slope * x + icpt)) ** 2) / np.sum((y - y.mean()) ** 2)
    result = {"iters": args.iters, "median_seconds": medians, "loglog_slope": float(slope),
              "r2": float(r2)}
    print(json.dumps(result, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
