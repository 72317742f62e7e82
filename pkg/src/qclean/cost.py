"""Cost model for choosing between incremental and full cleaning.

Costs are in tuple-access units.  For query ``i`` the incremental side is

    relax   (n - sum q_j)            tuples not yet returned by earlier queries
    detect  d_i = q_i + e_i          answer plus correlated tuples
    repair  eps_i * (q_i + e_i)      candidate computation per erroneous tuple
    update  n - S + S*p + eps_i*p    where S = sum eps_j of earlier queries

and cleaning everything up front costs ``q*n + n + eps*n + n + eps*p`` for
a workload of ``q`` queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Relation
from .rules import Rule

INCREMENTAL = "incremental"
FULL = "full"


@dataclass
class RuleStats:
    rule: str
    lhs_hist: dict  # lhs value -> group size
    rhs_hist: dict  # rhs value -> group size
    eps: int  # tuples in lhs groups with >= 2 distinct rhs values
    p: float  # mean distinct rhs values per dirty group
    dirty: np.ndarray = field(repr=False, default=None)  # per-row mask of those tuples


@dataclass
class CostStats:
    relation: str
    n: int
    rules: dict = field(default_factory=dict)
    sum_q: int = 0
    sum_e: int = 0
    sum_eps: int = 0
    queries: int = 0
    history: list = field(default_factory=list)

    @property
    def eps(self) -> int:
        return sum(r.eps for r in self.rules.values())

    @property
    def p(self) -> float:
        dirty = [r.p for r in self.rules.values() if r.eps]
        return sum(dirty) / len(dirty) if dirty else 1.0

    def summary(self) -> dict:
        return {"relation": self.relation, "n": self.n, "eps": self.eps, "p": round(self.p, 6),
                "sum_q": self.sum_q, "sum_e": self.sum_e, "sum_eps": self.sum_eps, "queries": self.queries}


def rule_stats(rel: Relation, fd: Rule) -> RuleStats:
    """Group-by statistics over the original values of one FD."""
    lhs = tuple(rel.attr(a) for a in fd.body.lhs)
    rhs = rel.attr(fd.body.rhs)
    lcodes, llook = rel.key_codes(lhs)
    rcodes, rlook = rel.key_codes((rhs,))
    lval = {c: k if len(k) > 1 else k[0] for k, c in llook.items()}
    rval = {c: k[0] for k, c in rlook.items()}
    valid = (lcodes >= 0) & (rcodes >= 0)
    lu, lc = np.unique(lcodes[valid], return_counts=True)
    ru, rc = np.unique(rcodes[valid], return_counts=True)
    pairs = np.unique(np.stack([lcodes[valid], rcodes[valid]], axis=1), axis=0) if valid.any() \
        else np.empty((0, 2), dtype=np.int64)
    gl, distinct = np.unique(pairs[:, 0], return_counts=True)
    dirty_codes = gl[distinct > 1]
    dirty = valid & np.isin(lcodes, dirty_codes)
    p = float(distinct[distinct > 1].mean()) if len(dirty_codes) else 1.0
    return RuleStats(fd.id, {lval[int(k)]: int(v) for k, v in zip(lu, lc)},
                     {rval[int(k)]: int(v) for k, v in zip(ru, rc)}, int(dirty.sum()), p, dirty)


def precompute_stats(rel: Relation, rules: list[Rule]) -> CostStats:
    stats = CostStats(rel.name, len(rel))
    for r in rules:
        if r.is_fd and r.relation == rel.name:
            stats.rules[r.id] = rule_stats(rel, r)
    return stats


def remaining_eps(stats: CostStats, rel: Relation) -> int:
    """Estimated erroneous tuples not yet examined."""
    total = 0
    for rid, rs in stats.rules.items():
        total += int((rs.dirty & ~rel.checked_mask(rid)).sum())
    return total


def query_eps(stats: CostStats, rel: Relation, rows: np.ndarray) -> int:
    total = 0
    for rid, rs in stats.rules.items():
        sub = rs.dirty[rows] & ~rel.checked_mask(rid)[rows]
        total += int(sub.sum())
    return total


def update_stats(stats: CostStats, q: int, eps: int, e: int = 0, fixes: int = 0) -> CostStats:
    stats.history.append({"q": q, "e": e, "eps": eps, "fixes": fixes})
    stats.sum_q += q
    stats.sum_e += e
    stats.sum_eps += eps
    stats.queries += 1
    return stats


def cost_incremental(stats: CostStats, q: int, e: int, eps: int, p: float | None = None,
                     sum_q: int | None = None, sum_eps: int | None = None) -> float:
    n = stats.n
    p = stats.p if p is None else p
    sq = stats.sum_q if sum_q is None else sum_q
    se = stats.sum_eps if sum_eps is None else sum_eps
    relax = max(n - sq, 0)
    detect = q + e
    repair = eps * (q + e)
    update = n - se + se * p + eps * p
    return relax + detect + repair + update


def cost_offline(stats: CostStats, queries: int, eps: int | None = None, p: float | None = None) -> float:
    n = stats.n
    eps = stats.eps if eps is None else eps
    p = stats.p if p is None else p
    return queries * n + n + eps * n + n + eps * p


def cost_full_remaining(stats: CostStats, eps_left: int, p: float | None = None) -> float:
    """Cleaning whatever is still unchecked in one pass: detect, repair, update."""
    n = stats.n
    p = stats.p if p is None else p
    return n + eps_left * n + n + eps_left * p


@dataclass
class Decision:
    strategy: str
    incremental: float
    full: float
    projected_queries: int


def cost_compare(stats: CostStats, q: int, e: int, eps: int, eps_left: int) -> Decision:
    """Incremental vs full cleaning for the current query and the projected rest.

    The rest of the workload is assumed to keep accessing unseen tuples at the
    average result size observed so far, with errors spread uniformly over the
    tuples not yet accessed.  Ties favour incremental, and so does a relation
    with nothing left to repair, where a full pass would only rescan it.
    """
    n = stats.n
    if eps == 0 and eps_left == 0:
        return Decision(INCREMENTAL, cost_incremental(stats, q, e, 0), cost_full_remaining(stats, 0) + n, 0)
    mean_q = (stats.sum_q + q) / (stats.queries + 1)
    mean_e = (stats.sum_e + e) / (stats.queries + 1)
    unseen = max(n - stats.sum_q - q, 0)
    r = math.ceil(unseen / mean_q) if mean_q > 0 else 0
    inc = cost_incremental(stats, q, e, eps)
    sq, se = stats.sum_q + q, stats.sum_eps + eps
    left = max(eps_left - eps, 0)
    for _ in range(r):
        q_k = min(mean_q, max(n - sq, 0))
        eps_k = left * q_k / max(n - sq, 1) if n > sq else 0.0
        inc += cost_incremental(stats, q_k, mean_e, eps_k, sum_q=sq, sum_eps=se)
        sq += q_k
        se += eps_k
        left -= eps_k
    full = cost_full_remaining(stats, eps_left) + (r + 1) * n
    strategy = FULL if full < inc else INCREMENTAL
    return Decision(strategy, inc, full, r)


__all__ = ["INCREMENTAL", "FULL", "RuleStats", "CostStats", "rule_stats", "precompute_stats",
           "remaining_eps", "query_eps", "update_stats", "cost_incremental", "cost_offline",
           "cost_full_remaining", "Decision", "cost_compare"]
