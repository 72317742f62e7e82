"""Seeded random instances shared by the engine tests and the acceptance suite."""

import random

from qclean.model import Relation, Schema
from qclean.rules import parse_rules
from qclean.workload import gen_errors

FD_POOL = ["a -> b", "b -> c", "a, b -> d", "c -> a", "d -> b", "a -> c"]
ABCD = Schema.of([(a, "int") for a in "abcd"])


def fd_instance(rng: random.Random, max_n: int = 500):
    """Relation over (a, b, c, d) with 1-3 FDs and an error rate of at most 30%.

    Half of the instances start from data satisfying a -> b -> c and a,b -> d
    and are dirtied with gen_errors; the rest are uniformly random rows.
    """
    n = rng.randint(5, max_n)
    fds = parse_rules("\n".join(f"f{i} = FD r: {f}" for i, f in enumerate(rng.sample(FD_POOL, rng.randint(1, 3)))))
    if rng.random() < 0.5:
        ka = rng.randint(2, 40)
        cb, cc, cd = rng.randint(2, 12), rng.randint(2, 8), rng.randint(2, 12)
        rows = []
        for _ in range(n):
            a = rng.randrange(ka)
            b = (a * 7 + 3) % cb
            rows.append([a, b, (b * 5 + 1) % cc, (a + b) % cd])
        rel = Relation.from_rows("r", ABCD, rows)
        rate = rng.uniform(0.01, 0.3)
        for fd in fds:
            if len(fd.body.lhs) == 1 or rng.random() < 0.5:
                rel, _ = gen_errors(rel, fd, rate, rng.randrange(1 << 30), domain=range(12))
    else:
        card = {a: rng.randint(2, 12) for a in "abcd"}
        rows = [[rng.randrange(card[a]) for a in "abcd"] for _ in range(n)]
        rel = Relation.from_rows("r", ABCD, rows)
    return rel, fds


def covering_workload(rng: random.Random, attrs: str = "abcd", domain: int = 40) -> list[str]:
    """Disjunctive point queries over one attribute that together cover its whole domain."""
    attr = rng.choice(attrs)
    vals = list(range(domain))
    rng.shuffle(vals)
    k = rng.randint(1, 5)
    return ["SELECT * FROM r WHERE " + " OR ".join(f"{attr} = {v}" for v in vals[i::k]) for i in range(k)]


SPJ_R = Schema.of([("k", "int"), ("b", "int")])
SPJ_S = Schema.of([("k", "int"), ("c", "int"), ("d", "int")])


def spj_instance(rng: random.Random, max_n: int = 60):
    """Two relations and FDs on both join sides: R.k -> R.b and S.d -> S.k."""
    kr = rng.randint(2, 8)
    r = Relation.from_rows("r", SPJ_R, [[rng.randrange(kr), rng.randrange(4)] for _ in range(rng.randint(2, max_n))])
    s = Relation.from_rows("s", SPJ_S, [[rng.randrange(kr + 2), rng.randrange(5), rng.randrange(6)]
                                        for _ in range(rng.randint(2, max_n))])
    rules = parse_rules("fr = FD r: k -> b\nfs = FD s: d -> k")
    return {"r": r, "s": s}, rules


def spj_query(rng: random.Random) -> str:
    filt = rng.choice([f"x.b = {rng.randrange(4)}", f"y.c = {rng.randrange(5)}", f"x.b < {rng.randrange(1, 4)}",
                       f"y.c >= {rng.randrange(5)} AND x.b = {rng.randrange(4)}"])
    return f"SELECT x.k, x.b, y.c, y.d FROM r x, s y WHERE x.k = y.k AND {filt}"
