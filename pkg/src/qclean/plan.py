"""Logical plans with injected cleaning operators.

A cleaning operator is placed over the lowest operator whose output it must
repair: over a relation's Select when the query filters that relation, over
the equi-join for relations reached only through the join, and below any
grouping.  Rules are attached only when their attributes meet the query's
projected or filtered attributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .errors import QCleanError, SchemaError
from .model import Schema
from .rules import Rule, rule_overlaps_query
from .sql import BoolOp, ColRef, Comparison, QueryAst, SelectItem, expr_columns


@dataclass(frozen=True)
class Scan:
    relation: str
    alias: str


@dataclass(frozen=True)
class Select:
    child: "Node"
    alias: str
    expr: object


@dataclass(frozen=True)
class CleanSelect:
    child: "Node"
    alias: str
    relation: str
    rules: tuple


@dataclass(frozen=True)
class CleanFull:
    child: "Node"
    relation: str
    rules: tuple


@dataclass(frozen=True)
class EquiJoin:
    left: "Node"
    right: "Node"
    left_key: ColRef
    right_key: ColRef


@dataclass(frozen=True)
class CleanJoin:
    child: EquiJoin
    rules_left: tuple
    rules_right: tuple


@dataclass(frozen=True)
class GroupBy:
    child: "Node"
    keys: tuple
    aggs: tuple


@dataclass(frozen=True)
class Project:
    child: "Node"
    items: tuple  # bound SelectItems
    labels: tuple


Node = Union[Scan, Select, CleanSelect, CleanFull, EquiJoin, CleanJoin, GroupBy, Project]

CLEANING = (CleanSelect, CleanFull, CleanJoin)


def children(node) -> list:
    if isinstance(node, EquiJoin):
        return [node.left, node.right]
    if isinstance(node, Scan):
        return []
    return [node.child]


def walk(node):
    yield node
    for c in children(node):
        yield from walk(c)


def cleaning_ops(node) -> list:
    return [n for n in walk(node) if isinstance(n, CLEANING)]


def explain(node, depth: int = 0) -> str:
    pad = "  " * depth
    if isinstance(node, Scan):
        head = f"Scan({node.relation} as {node.alias})" if node.alias != node.relation else f"Scan({node.relation})"
    elif isinstance(node, Select):
        head = f"Select({_fmt_expr(node.expr)})"
    elif isinstance(node, CleanSelect):
        head = f"CleanSelect[{', '.join(node.rules)}]({node.alias})"
    elif isinstance(node, CleanFull):
        head = f"CleanFull[{', '.join(node.rules)}]({node.relation})"
    elif isinstance(node, EquiJoin):
        head = f"EquiJoin({node.left_key} = {node.right_key})"
    elif isinstance(node, CleanJoin):
        head = f"CleanJoin[{', '.join(node.rules_left + node.rules_right)}]"
    elif isinstance(node, GroupBy):
        head = f"GroupBy({', '.join(map(str, node.keys))}; {', '.join(map(str, node.aggs))})"
    else:
        head = f"Project({', '.join(node.labels)})"
    return "\n".join([pad + head] + [explain(c, depth + 1) for c in children(node)])


def _fmt_expr(e) -> str:
    if isinstance(e, Comparison):
        return f"{e.col} {e.op} {e.value!r}"
    return f" {e.op.upper()} ".join(f"({_fmt_expr(x)})" if isinstance(x, BoolOp) else _fmt_expr(x) for x in e.items)


# ---------------------------------------------------------------------------
# binding


class _Binder:
    def __init__(self, ast: QueryAst, catalog: Mapping[str, Schema]):
        self.aliases: dict[str, str] = {}
        for rel, alias in ast.tables:
            if rel not in catalog:
                raise SchemaError(f"unknown relation {rel!r}")
            self.aliases[alias] = rel
        self.catalog = catalog

    def col(self, c: ColRef) -> ColRef:
        if c.table is not None:
            if c.table not in self.aliases:
                raise SchemaError(f"unknown relation or alias {c.table!r}")
            self.catalog[self.aliases[c.table]].index(c.attr)
            return c
        owners = [a for a, r in self.aliases.items() if c.attr in self.catalog[r].attrs]
        if not owners:
            raise SchemaError(f"unknown attribute {c.attr!r}")
        if len(owners) > 1:
            raise SchemaError(f"ambiguous attribute {c.attr!r}; qualify it with one of {owners}")
        return ColRef(owners[0], c.attr)

    def expr(self, e):
        if e is None:
            return None
        if isinstance(e, Comparison):
            return Comparison(self.col(e.col), e.op, e.value)
        return BoolOp(e.op, tuple(self.expr(x) for x in e.items))

    def item(self, i: SelectItem) -> SelectItem:
        return SelectItem(None if i.col is None else self.col(i.col), i.agg)


def _split_by_alias(expr, aliases) -> dict:
    """Per-alias filter expressions; a disjunction may not span relations."""
    if expr is None:
        return {}
    owners = {c.table for c in expr_columns(expr)}
    if len(owners) == 1:
        return {owners.pop(): expr}
    if isinstance(expr, BoolOp) and expr.op == "and":
        parts: dict = {}
        for item in expr.items:
            for alias, sub in _split_by_alias(item, aliases).items():
                parts.setdefault(alias, []).append(sub)
        return {a: v[0] if len(v) == 1 else BoolOp("and", tuple(v)) for a, v in parts.items()}
    raise QCleanError("a disjunction over attributes of both relations is not supported")


def plan(ast: QueryAst, rules: list[Rule], catalog: Mapping[str, Schema], mode: str = "incremental",
         decisions: Optional[Mapping[str, str]] = None) -> Node:
    """Bind ``ast`` and inject cleaning operators.

    ``decisions`` maps a relation to ``"full"`` when the cost model chose to
    clean the rest of it before the query runs; in offline mode every
    relation with relevant rules is cleaned that way.
    """
    b = _Binder(ast, catalog)
    decisions = dict(decisions or {})
    items = []
    labels = []
    for i in ast.select:
        if i.col is None and i.agg is None:
            for alias, rel in b.aliases.items():
                for a in catalog[rel].attrs:
                    items.append(SelectItem(ColRef(alias, a)))
                    labels.append(a if len(b.aliases) == 1 else f"{alias}.{a}")
        else:
            items.append(b.item(i))
            labels.append(str(i))
    where = b.expr(ast.where)
    group = tuple(b.col(c) for c in ast.group_by)
    join = None
    if ast.join is not None:
        lk, rk = b.col(ast.join.left), b.col(ast.join.right)
        if lk.table == rk.table:
            raise QCleanError("join predicate must relate the two relations")
        join = (lk, rk)
    filters = _split_by_alias(where, b.aliases)

    projected: dict = {a: set() for a in b.aliases}
    filtered: dict = {a: set() for a in b.aliases}
    for i in items:
        if i.col is not None:
            projected[i.col.table].add(i.col.attr)
    for c in group:
        projected[c.table].add(c.attr)
    for c in expr_columns(where):
        filtered[c.table].add(c.attr)
    if join:
        for c in join:
            filtered[c.table].add(c.attr)

    def relevant(alias: str) -> tuple:
        rel = b.aliases[alias]
        return tuple(r.id for r in rules
                     if r.relation == rel and rule_overlaps_query(r, projected[alias], filtered[alias]))

    def leaf(alias: str) -> tuple[Node, tuple]:
        rel = b.aliases[alias]
        node: Node = Scan(rel, alias)
        rids = relevant(alias)
        full = rids and (mode == "offline" or decisions.get(rel) == "full")
        if full:
            node = CleanFull(node, rel, rids)
        if alias in filters:
            node = Select(node, alias, filters[alias])
        if rids and not full and (alias in filters or join is None):
            node = CleanSelect(node, alias, rel, rids)
            return node, ()
        return node, () if full else rids

    aliases = [a for _, a in ast.tables]
    if join is None:
        node, _ = leaf(aliases[0])
    else:
        lk, rk = join
        if lk.table != aliases[0]:
            lk, rk = rk, lk
        left, lr = leaf(aliases[0])
        right, rr = leaf(aliases[1])
        node = EquiJoin(left, right, lk, rk)
        # rules of filtered sides still re-check the join's new participants
        lr = lr or _cleaned_rules(left)
        rr = rr or _cleaned_rules(right)
        if lr or rr:
            node = CleanJoin(node, lr, rr)
    aggs = tuple(i for i in items if i.agg)
    if aggs or group:
        node = GroupBy(node, group, aggs)
    return Project(node, tuple(items), tuple(labels))


def _cleaned_rules(node) -> tuple:
    return node.rules if isinstance(node, CleanSelect) else ()


__all__ = ["Scan", "Select", "CleanSelect", "CleanFull", "EquiJoin", "CleanJoin", "GroupBy", "Project",
           "plan", "explain", "walk", "cleaning_ops", "children"]
