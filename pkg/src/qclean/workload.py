"""Error injection, accuracy scoring, synthetic instances and batch execution."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .engine import Session
from .errors import RuleError
from .model import Relation, Schema, Uncertain, most_probable, value_key
from .rules import Rule


def gen_errors(rel: Relation, rule: Rule, rate: float, seed: int = 0, domain: Sequence | None = None,
               truth: dict | None = None) -> tuple[Relation, dict]:
    """Copy of ``rel`` with ``ceil(rate * |group|)`` rhs values replaced in every lhs group.

    Replacement values are drawn uniformly from ``domain`` (default: the rhs
    values present in ``rel``) minus the current value.  The returned ground
    truth maps ``(tid, attr)`` to the value before the first edit, so passing
    an earlier ``truth`` keeps the original of re-edited cells.
    """
    if not rule.is_fd:
        raise RuleError(f"error injection needs an FD, got {rule.id}")
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    rng = random.Random(seed)
    out = rel.copy()
    truth = dict(truth or {})
    lhs = tuple(out.attr(a) for a in rule.body.lhs)
    rhs = out.attr(rule.body.rhs)
    values = sorted(set(domain if domain is not None else
                        (out.original(r, rhs) for r in range(len(out)) if out.original(r, rhs) is not None)),
                    key=value_key)
    groups: dict = {}
    for r in range(len(out)):
        key = tuple(out.original(r, a) for a in lhs)
        if None not in key:
            groups.setdefault(key, []).append(r)
    for rows in groups.values():
        k = math.ceil(rate * len(rows))
        for r in sorted(rng.sample(rows, k)):
            old = out.original(r, rhs)
            choices = [v for v in values if v != old]
            if not choices:
                raise ValueError(f"domain of {rule.body.rhs} has no alternative to {old!r}")
            truth.setdefault((out.tids[r], rule.body.rhs), old)
            out.set_cell(r, rhs, rng.choice(choices))
    return out, truth


@dataclass
class Score:
    precision: float
    recall: float
    f1: float
    updates: int
    correct: int
    errors: int


def score(rel: Relation, truth: dict) -> Score:
    """Precision and recall of most-probable repairs on the attributes covered by ``truth``.

    An update is an uncertain cell whose most probable value differs from its
    original; it is correct when that value is the ground truth.  Cells
    missing from ``truth`` are assumed clean.  With no updates precision is 0.
    """
    attrs = {a for _, a in truth}
    errors = sum(1 for (tid, a), v in truth.items() if rel.original(rel.row_of[tid], rel.attr(a)) != v)
    updates = correct = 0
    for a in attrs:
        ai = rel.attr(a)
        for r, tid in enumerate(rel.tids):
            cell = rel.cells[r][ai]
            if not isinstance(cell, Uncertain):
                continue
            best = most_probable(cell)
            if best == cell.original:
                continue
            updates += 1
            correct += best == truth.get((tid, a), cell.original)
    precision = correct / updates if updates else 0.0
    recall = correct / errors if errors else (1.0 if not updates else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Score(precision, recall, f1, updates, correct, errors)


# ---------------------------------------------------------------------------
# synthetic instances


@dataclass
class Instance:
    relation: Relation
    rules: list
    truth: dict = field(default_factory=dict)
    queries: list = field(default_factory=list)


def keyed_relation(name: str, n: int, groups: int, rhs_of=None, seed: int = 0) -> Relation:
    """``n`` tuples ``(id, k, v, w)`` with ``k`` cycling over ``groups`` values and ``v = rhs_of(k)``."""
    rng = random.Random(seed)
    rhs_of = rhs_of or (lambda k: k)
    schema = Schema.of([("id", "int"), ("k", "int"), ("v", "int"), ("w", "float")])
    rows = [[i, i % groups, rhs_of(i % groups), round(rng.random() * 100, 3)] for i in range(n)]
    return Relation.from_rows(name, schema, rows)


def perf_instance(n: int = 100_000, groups: int = 5_000, queries: int = 50, selectivity: float = 0.02,
                  rate: float = 0.1, seed: int = 0) -> Instance:
    """Every lhs group dirty; the workload is disjoint rhs ranges of the given selectivity."""
    from .rules import parse_rules

    clean = keyed_relation("r", n, groups, seed=seed)
    rules = parse_rules("fd1 = FD r: k -> v")
    dirty, truth = gen_errors(clean, rules[0], rate, seed)
    width = max(1, round(groups * selectivity))
    qs = [f"SELECT id, k, v FROM r WHERE v >= {lo} AND v < {lo + width}"
          for lo in range(0, groups, width)][:queries]
    return Instance(dirty, rules, truth, qs)


def switch_instance(n: int = 2_000, groups: int = 100, rhs_values: int = 4, queries: int = 90,
                    rate: float = 0.05, seed: int = 0) -> Instance:
    """Low rhs cardinality, so fixes carry many candidates; queries have random selectivity."""
    from .rules import parse_rules

    clean = keyed_relation("r", n, groups, rhs_of=lambda k: k % rhs_values, seed=seed)
    rules = parse_rules("fd1 = FD r: k -> v")
    dirty, truth = gen_errors(clean, rules[0], rate, seed)
    rng = random.Random(seed + 1)
    qs = []
    for _ in range(queries):
        width = max(1, int(groups * rng.uniform(0.005, 0.05)))
        lo = rng.randrange(0, groups - width + 1)
        qs.append(f"SELECT id, k, v FROM r WHERE k >= {lo} AND k < {lo + width}")
    return Instance(dirty, rules, truth, qs)


def majority_instance(groups: int = 20, size: int = 6, seed: int = 0) -> Instance:
    """Every group has exactly one wrong rhs value, so the truth holds a majority of at least 2/3."""
    from .rules import parse_rules

    clean = keyed_relation("r", groups * size, groups, rhs_of=lambda k: k, seed=seed)
    rules = parse_rules("fd1 = FD r: k -> v")
    dirty, truth = gen_errors(clean, rules[0], 1 / size, seed)
    return Instance(dirty, rules, truth, [f"SELECT * FROM r WHERE k = {g}" for g in range(groups)])


# ---------------------------------------------------------------------------
# batch execution


@dataclass
class BatchReport:
    records: list
    switches: list
    total_cost: float
    total_ms: float
    error: str | None = None


def run_batch(session: Session, queries: Iterable[str]) -> BatchReport:
    """Execute ``queries`` in order; stops at the first failure and reports what ran."""
    records, total_ms, error = [], 0.0, None
    for q in queries:
        try:
            _, rec = session.execute(q)
        except Exception as exc:  # reported, the caller decides the exit code
            error = f"{type(exc).__name__}: {exc}"
            break
        records.append(rec)
        total_ms += rec.timing["total_ms"]
    return BatchReport(records, list(session.switches), session.total_cost, total_ms, error)


__all__ = ["gen_errors", "score", "Score", "Instance", "keyed_relation", "perf_instance", "switch_instance",
           "majority_instance", "BatchReport", "run_batch"]
