"""Wall time of incremental, auto and offline cleaning on a generated keyed relation."""

import argparse
import time

from qclean import EngineConfig, Session
from qclean.workload import perf_instance, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tuples", type=int, default=100_000)
    ap.add_argument("--groups", type=int, default=5_000)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--selectivity", type=float, default=0.02)
    ap.add_argument("--rate", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--modes", nargs="+", default=["incremental", "auto", "offline"])
    args = ap.parse_args()

    inst = perf_instance(args.tuples, args.groups, args.queries, args.selectivity, args.rate, args.seed)
    print(f"{len(inst.relation)} tuples, {len(inst.truth)} injected errors, {len(inst.queries)} queries")
    for mode in args.modes:
        t0 = time.perf_counter()
        s = Session({"r": inst.relation.copy()}, inst.rules, EngineConfig(mode=mode))
        rep = run_batch(s, inst.queries)
        wall = time.perf_counter() - t0
        print(f"{mode:12s} wall {wall:7.2f}s  sim cost {rep.total_cost:14.0f}  switches {len(rep.switches)}"
              + (f"  error {rep.error}" if rep.error else ""))


if __name__ == "__main__":
    main()
