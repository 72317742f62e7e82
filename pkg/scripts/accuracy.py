"""Precision and recall of most-probable repairs against injected ground truth."""

import argparse

from qclean import EngineConfig, Session
from qclean.workload import gen_errors, keyed_relation, majority_instance, run_batch, score
from qclean.rules import parse_rules


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tuples", type=int, default=5_000)
    ap.add_argument("--groups", type=int, default=250)
    ap.add_argument("--rates", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = majority_instance()
    s = Session({"r": inst.relation}, inst.rules, EngineConfig(mode="incremental"))
    run_batch(s, inst.queries)
    sc = score(s.relations["r"], inst.truth)
    print(f"majority instance: precision {sc.precision:.3f} recall {sc.recall:.3f}")

    (fd,) = parse_rules("fd1 = FD r: k -> v")
    clean = keyed_relation("r", args.tuples, args.groups, seed=args.seed)
    for rate in args.rates:
        dirty, truth = gen_errors(clean, fd, rate, args.seed)
        s = Session({"r": dirty}, [fd], EngineConfig(mode="incremental"))
        width = max(1, args.groups // 20)
        run_batch(s, [f"SELECT * FROM r WHERE k >= {lo} AND k < {lo + width}" for lo in range(0, args.groups, width)])
        sc = score(s.relations["r"], truth)
        print(f"rate {rate:.2f}: errors {sc.errors:5d} updates {sc.updates:5d} "
              f"precision {sc.precision:.3f} recall {sc.recall:.3f} f1 {sc.f1:.3f}")


if __name__ == "__main__":
    main()
