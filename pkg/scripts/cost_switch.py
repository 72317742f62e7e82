"""Per-query simulated cost of each mode on a low rhs-cardinality workload."""

import argparse

from qclean import EngineConfig, Session
from qclean.workload import run_batch, switch_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tuples", type=int, default=2_000)
    ap.add_argument("--groups", type=int, default=100)
    ap.add_argument("--rhs-values", type=int, default=4)
    ap.add_argument("--queries", type=int, default=90)
    ap.add_argument("--rate", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--every", type=int, default=10, help="print cumulative cost every N queries")
    args = ap.parse_args()

    inst = switch_instance(args.tuples, args.groups, args.rhs_values, args.queries, args.rate, args.seed)
    runs = {}
    for mode in ("incremental", "auto", "offline"):
        s = Session({"r": inst.relation.copy()}, inst.rules, EngineConfig(mode=mode))
        runs[mode] = run_batch(s, inst.queries)
    print("query  " + "  ".join(f"{m:>12s}" for m in runs))
    totals = {m: 0.0 for m in runs}
    for i in range(len(inst.queries)):
        for m, rep in runs.items():
            totals[m] += rep.records[i].cost
        if (i + 1) % args.every == 0 or i + 1 == len(inst.queries):
            print(f"{i + 1:5d}  " + "  ".join(f"{totals[m]:12.0f}" for m in runs))
    print(f"auto switched at {runs['auto'].switches}")


if __name__ == "__main__":
    main()
