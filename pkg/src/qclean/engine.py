"""Plan evaluation with probabilistic semantics and on-demand cleaning.

A :class:`Session` owns the loaded relations (updated in place), the bound
rules, per-relation cost statistics and per-DC theta matrices.  Each query is
planned, optionally re-planned after a cost decision, and evaluated.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .config import EngineConfig
from .cost import (FULL, INCREMENTAL, CostStats, cost_compare, cost_full_remaining, cost_incremental,
                   precompute_stats, query_eps, remaining_eps, update_stats)
from .errors import QCleanError
from .model import EPS, Relation, Uncertain, distribution, format_cell, most_probable
from .plan import (CleanFull, CleanJoin, CleanSelect, EquiJoin, GroupBy, Node, Project, Scan, Select,
                   plan)
from .relax import detect_fd_violations, lhs_group_rows, relax_fd
from .repair import FDIndex, FixSet, dc_fixes, fd_fixes
from .rules import Rule, bind_rules
from .sql import Comparison, QueryAst, parse_query
from .store import apply_fixes
from .theta import build_theta_matrix, estimate_accuracy, estimate_errors, partial_theta_join_rows


@dataclass
class RowSet:
    rel: Relation
    rows: np.ndarray
    alias: str
    expr: object = None


@dataclass
class JoinSet:
    left: RowSet
    right: RowSet
    pairs: np.ndarray  # (k, 2) row indices


@dataclass
class ResultSet:
    columns: list
    rows: list
    lineage: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def format(self) -> str:
        table = [list(map(str, self.columns))]
        for r in self.rows:
            table.append([_fmt(c) for c in r])
        widths = [max(len(row[i]) for row in table) for i in range(len(self.columns))]
        out = [" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table]
        out.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(out)


def _fmt(c) -> str:
    if isinstance(c, float):
        return f"{c:.6g}"
    return format_cell(c)


@dataclass
class QueryRecord:
    qid: int
    query: str
    rows: int = 0
    strategy: str = INCREMENTAL
    eps: int = 0
    switched: bool = False
    violations: int = 0
    recheck_violations: int = 0
    fixes: int = 0
    cost: float = 0.0
    estimates: dict = field(default_factory=dict)  # dc id -> {"accuracy", "support", "full"}
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScopeResult:
    q: int = 0
    e: int = 0
    eps: int = 0
    violations: int = 0
    fixes: int = 0
    changed: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


class Session:
    def __init__(self, relations: Mapping[str, Relation], rules: Iterable[Rule],
                 config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.relations: dict[str, Relation] = dict(relations)
        self.rules = bind_rules(rules, self.relations)
        self.by_id = {r.id: r for r in self.rules}
        self.stats: dict[str, CostStats] = {name: precompute_stats(rel, self.rules)
                                            for name, rel in self.relations.items()}
        self.indexes: dict[str, FDIndex] = {}
        self.matrices = {}
        for r in self.rules:
            if not r.is_fd:
                rel = self.relations[r.relation]
                m = build_theta_matrix(rel, r, self.config.partitions)
                estimate_errors(rel, self.config.partitions, r, m)
                self.matrices[r.id] = m
        self.full_done: dict[str, bool] = {}
        self.switches: list[tuple[int, str]] = []
        self.records: list[QueryRecord] = []
        self.total_cost = 0.0

    # ------------------------------------------------------------------ api
    @property
    def catalog(self) -> dict:
        return {n: r.schema for n, r in self.relations.items()}

    def plan(self, ast: QueryAst, decisions=None) -> Node:
        mode = self.config.mode
        return plan(ast, self.rules, self.catalog, "offline" if mode == "offline" else "incremental",
                    decisions)

    def execute(self, text: str) -> tuple[ResultSet, QueryRecord]:
        t0 = time.perf_counter()
        ast = parse_query(text)
        rec = QueryRecord(len(self.records) + 1, ast.text)
        decisions = self._decide(ast, rec) if self.config.mode == "auto" else {}
        node = self.plan(ast, decisions)
        t1 = time.perf_counter()
        ctx = _Ctx(rec, {r for r, _ in ast.tables})
        result = self._eval(node, ctx)
        rec.rows = len(result)
        for name in ctx.relations:
            if name not in ctx.costed:
                rec.cost += self.relations[name].__len__()
        self.total_cost += rec.cost
        t2 = time.perf_counter()
        rec.timing = {"plan_ms": round((t1 - t0) * 1e3, 3), "eval_ms": round((t2 - t1) * 1e3, 3),
                      "total_ms": round((t2 - t0) * 1e3, 3)}
        self.records.append(rec)
        return result, rec

    def relation_rules(self, name: str) -> list[Rule]:
        return [r for r in self.rules if r.relation == name]

    # ------------------------------------------------------------ decisions
    def _decide(self, ast: QueryAst, rec: QueryRecord) -> dict:
        """Cost-based choice per filtered relation between incremental and full cleaning."""
        out = {}
        probe = self.plan(ast)
        for node in _walk(probe):
            if not isinstance(node, CleanSelect):
                continue
            rel = self.relations[node.relation]
            if self.full_done.get(rel.name):
                out[rel.name] = FULL
                continue
            stats = self.stats[rel.name]
            rows = self._eval(node.child, _Ctx(QueryRecord(0, ""), set())).rows
            fds = [self.by_id[r] for r in node.rules if self.by_id[r].is_fd]
            if not fds:
                continue
            scope = self._relaxed_scope(rel, rows, fds)
            e = int(len(scope) - len(rows))
            eps_i = query_eps(stats, rel, scope)
            eps_left = remaining_eps(stats, rel)
            d = cost_compare(stats, len(rows), e, eps_i, eps_left)
            if d.strategy == FULL:
                out[rel.name] = FULL
                rec.switched = True
                self.switches.append((rec.qid, rel.name))
        return out

    # ----------------------------------------------------------- cleaning
    def _index(self, fd: Rule) -> FDIndex:
        ix = self.indexes.get(fd.id)
        if ix is None:
            ix = self.indexes[fd.id] = FDIndex(self.relations[fd.relation], fd)
        return ix

    def _relaxed_scope(self, rel: Relation, rows: np.ndarray, fds: list[Rule]) -> np.ndarray:
        mask = np.zeros(len(rel), dtype=bool)
        mask[rows] = True
        tids = rel.tids_of(rows)
        for fd in fds:
            res = relax_fd(rel, tids, fd)
            if res.extra:
                mask[rel.rows_of(res.extra)] = True
        return np.flatnonzero(mask)

    def clean_scope(self, rel: Relation, rows: np.ndarray, rule_ids: Iterable[str], ctx: "_Ctx",
                    relax: bool = True) -> ScopeResult:
        """Relax ``rows`` under every rule, detect unchecked violations, repair in place."""
        rules = [self.by_id[r] for r in rule_ids]
        fds = [r for r in rules if r.is_fd]
        dcs = [r for r in rules if not r.is_fd]
        out = ScopeResult(q=len(rows))
        scope = self._relaxed_scope(rel, rows, fds) if relax and fds else np.unique(rows)
        out.e = int(len(scope) - len(np.unique(rows)))
        fixes = FixSet()
        for fd in sorted(fds, key=lambda r: r.id):
            closure = lhs_group_rows(rel, scope, fd)
            vs = detect_fd_violations(rel, rel.tids_of(closure), fd)
            ix = self._index(fd)
            for g in vs.fd.get(fd.id, []):
                out.violations += 1
                out.eps += len(g.tids)
                fixes.update(fd_fixes(rel, g, fd, ix))
            rel.mark_checked(fd.id, closure)
        for dc in sorted(dcs, key=lambda r: r.id):
            m = self.matrices[dc.id]
            target = self._dc_target(rel, m, rows, dc, ctx)
            vs = partial_theta_join_rows(m, rel, target, dc)
            involved = set()
            for v in vs.dc.get(dc.id, []):
                out.violations += 1
                involved.update((v.t1, v.t2))
                fixes.update(dc_fixes(rel, v, dc))
            out.eps += len(involved)
        log = apply_fixes(rel, fixes)
        out.fixes = len(log)
        if log:
            out.changed = np.unique(rel.rows_of(t for t, _, _, _ in log))
        return out

    def _dc_target(self, rel: Relation, m, rows: np.ndarray, dc: Rule, ctx: "_Ctx") -> np.ndarray:
        """Apply the accuracy estimate: clean all of ``rel`` or only ``rows`` for this DC."""
        vals = rel.column(rel.attr(m.attr)).orig[rows]
        vals = vals[~np.isnan(vals)]
        k = m.range_index(float(np.median(vals))) if len(vals) else 0
        acc, sup = estimate_accuracy(m.range_vio, len(rows), k, m.p, m.unchecked_partitions())
        full = acc > self.config.accuracy_threshold
        ctx.rec.estimates[dc.id] = {"accuracy": acc, "support": sup, "full": bool(full)}
        return np.arange(len(rel)) if full else rows

    def clean_full(self, rel: Relation, rule_ids: Iterable[str], ctx: "_Ctx") -> ScopeResult:
        stats = self.stats[rel.name]
        eps_left = remaining_eps(stats, rel)
        res = self.clean_scope(rel, np.arange(len(rel)), rule_ids, ctx, relax=False)
        self.full_done[rel.name] = True
        self._account(ctx, rel.name, cost_full_remaining(stats, eps_left) + len(rel))
        ctx.rec.strategy = FULL
        return res

    def _account(self, ctx: "_Ctx", name: str, cost: float) -> None:
        ctx.rec.cost += cost
        ctx.costed.add(name)

    def _record_incremental(self, ctx: "_Ctx", rel: Relation, res: ScopeResult) -> None:
        stats = self.stats[rel.name]
        if self.full_done.get(rel.name):
            self._account(ctx, rel.name, len(rel))
        else:
            self._account(ctx, rel.name, cost_incremental(stats, res.q, res.e, res.eps))
            update_stats(stats, res.q, res.eps, res.e, res.fixes)
        ctx.rec.eps += res.eps
        ctx.rec.violations += res.violations
        ctx.rec.fixes += res.fixes

    # --------------------------------------------------------- evaluation
    def _eval(self, node: Node, ctx: "_Ctx"):
        if isinstance(node, Scan):
            rel = self.relations[node.relation]
            return RowSet(rel, np.arange(len(rel)), node.alias)
        if isinstance(node, Select):
            child = self._eval(node.child, ctx)
            mask = self.mask(child.rel, node.expr)
            return RowSet(child.rel, child.rows[mask[child.rows]], node.alias, node.expr)
        if isinstance(node, CleanFull):
            rel = self.relations[node.relation]
            if self.config.mode == "offline" and not self.full_done.get(rel.name):
                self._offline(rel, node.rules, ctx)
            elif not self.full_done.get(rel.name):
                res = self.clean_full(rel, node.rules, ctx)
                ctx.rec.eps += res.eps
                ctx.rec.violations += res.violations
                ctx.rec.fixes += res.fixes
            else:
                self._account(ctx, rel.name, len(rel))
            return self._eval(node.child, ctx)
        if isinstance(node, CleanSelect):
            child = self._eval(node.child, ctx)
            rel = child.rel
            res = self.clean_scope(rel, child.rows, node.rules, ctx)
            self._record_incremental(ctx, rel, res)
            if child.expr is not None:
                rows = np.flatnonzero(self.mask(rel, child.expr))
            else:
                rows = child.rows
            return RowSet(rel, rows, node.alias, child.expr)
        if isinstance(node, EquiJoin):
            left, right = self._eval(node.left, ctx), self._eval(node.right, ctx)
            pairs = self.join(left, left.rows, right, right.rows, node)
            return JoinSet(left, right, pairs)
        if isinstance(node, CleanJoin):
            return self._clean_join(node, ctx)
        if isinstance(node, GroupBy):
            return self._group(node, self._eval(node.child, ctx))
        if isinstance(node, Project):
            return self._project(node, self._eval(node.child, ctx))
        raise QCleanError(f"unknown plan node {type(node).__name__}")

    def _offline(self, rel: Relation, rule_ids, ctx: "_Ctx") -> None:
        from .offline import offline_clean

        stats = self.stats[rel.name]
        eps_left = remaining_eps(stats, rel)
        rules = [self.by_id[r] for r in rule_ids]
        report = offline_clean(rel, rules, inplace=True)
        self.full_done[rel.name] = True
        ctx.rec.violations += report.violations
        ctx.rec.eps += report.eps
        ctx.rec.fixes += report.fixes
        ctx.rec.strategy = "offline"
        self._account(ctx, rel.name, cost_full_remaining(stats, eps_left) + len(rel))

    # predicates ---------------------------------------------------------
    def mask(self, rel: Relation, expr) -> np.ndarray:
        if isinstance(expr, Comparison):
            return rel.qualify_mask(rel.attr(expr.col.attr), expr.op, expr.value)
        masks = [self.mask(rel, e) for e in expr.items]
        out = masks[0].copy()
        for m in masks[1:]:
            if expr.op == "and":
                out &= m
            else:
                out |= m
        return out

    # joins ----------------------------------------------------------------
    def join(self, left: RowSet, lrows: np.ndarray, right: RowSet, rrows: np.ndarray, node) -> np.ndarray:
        """Row pairs whose join-key candidate sets overlap."""
        la, ra = left.rel.attr(node.left_key.attr), right.rel.attr(node.right_key.attr)
        lv, lr, lrange = _key_values(left.rel, lrows, la)
        rv, rr, rrange = _key_values(right.rel, rrows, ra)
        out = [np.empty((0, 2), dtype=np.int64)]
        if len(lv) and len(rv):
            numeric = left.rel.schema.kinds[la].numeric
            if numeric != right.rel.schema.kinds[ra].numeric:
                raise QCleanError("join keys have incompatible kinds")
            if not numeric:
                codes: dict = {}
                lv = np.array([codes.setdefault(v, len(codes)) for v in lv], dtype=np.float64)
                rv = np.array([codes.setdefault(v, len(codes)) for v in rv], dtype=np.float64)
            lv, rv = np.asarray(lv, dtype=np.float64), np.asarray(rv, dtype=np.float64)
            order = np.argsort(rv, kind="stable")
            rv, rr_s = rv[order], rr[order]
            lo = np.searchsorted(rv, lv - EPS, side="left")
            hi = np.searchsorted(rv, lv + EPS, side="right")
            counts = hi - lo
            if counts.sum():
                li = np.repeat(np.arange(len(lv)), counts)
                starts = np.repeat(lo, counts)
                offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
                out.append(np.stack([lr[li], rr_s[starts + offs]], axis=1))
        if lrange or rrange:
            from .model import keys_overlap

            lcells = {int(r): left.rel.cells[int(r)][la] for r in lrows}
            rcells = {int(r): right.rel.cells[int(r)][ra] for r in rrows}
            extra = []
            for r in lrange:
                extra.extend((r, s) for s, c in rcells.items() if keys_overlap(lcells[r], c))
            for s in rrange:
                extra.extend((r, s) for r, c in lcells.items() if keys_overlap(c, rcells[s]))
            if extra:
                out.append(np.asarray(extra, dtype=np.int64))
        pairs = np.concatenate(out)
        return np.unique(pairs, axis=0) if len(pairs) else pairs

    def _clean_join(self, node: CleanJoin, ctx: "_Ctx") -> JoinSet:
        base = node.child
        left, right = self._eval(base.left, ctx), self._eval(base.right, ctx)
        pairs = self.join(left, left.rows, right, right.rows, base)
        done_l = np.zeros(len(left.rel), dtype=bool)
        done_r = np.zeros(len(right.rel), dtype=bool)
        rounds = 0
        while True:
            part_l = np.unique(pairs[:, 0]) if len(pairs) else np.empty(0, dtype=np.int64)
            part_r = np.unique(pairs[:, 1]) if len(pairs) else np.empty(0, dtype=np.int64)
            part_l, part_r = part_l[~done_l[part_l]], part_r[~done_r[part_r]]
            if not len(part_l) and not len(part_r):
                break
            changed_l = changed_r = np.empty(0, dtype=np.int64)
            for side, part, rules in ((left, part_l, node.rules_left), (right, part_r, node.rules_right)):
                if rounds and len(part):
                    # tuples cleaned in an earlier round are not relaxed again
                    seen = np.logical_and.reduce([side.rel.checked_mask(r) for r in rules]) if rules else None
                    if seen is not None:
                        part = part[~seen[part]]
                if not rules or not len(part):
                    continue
                res = self.clean_scope(side.rel, part, rules, ctx)
                self._record_incremental(ctx, side.rel, res)
                if rounds:
                    ctx.rec.recheck_violations += res.violations
                if side is left:
                    changed_l = res.changed
                else:
                    changed_r = res.changed
            done_l[part_l] = True
            done_r[part_r] = True
            # refresh inputs whose filters may now admit repaired tuples
            new_l = self._refresh(left, changed_l)
            new_r = self._refresh(right, changed_r)
            # changed rows of one side can only add pairs with the other side's input
            fresh = [pairs]
            if len(new_l):
                fresh.append(self.join(left, new_l, right, right.rows, base))
            if len(new_r):
                fresh.append(self.join(left, left.rows, right, new_r, base))
            pairs = np.concatenate(fresh)
            pairs = np.unique(pairs, axis=0) if len(pairs) else pairs
            rounds += 1
        return JoinSet(left, right, pairs)

    def _refresh(self, side: RowSet, changed: np.ndarray) -> np.ndarray:
        """Changed rows that belong to the side's input after cleaning; extends the input in place."""
        if not len(changed):
            return changed
        if side.expr is not None:
            m = self.mask(side.rel, side.expr)
            changed = changed[m[changed]]
        side.rows = np.union1d(side.rows, changed)
        return changed

    # output ---------------------------------------------------------------
    def _getter(self, src):
        if isinstance(src, RowSet):
            def get(i, col):
                return src.rel.cells[int(src.rows[i])][src.rel.attr(col.attr)]

            def lineage(i):
                return (src.rel.tids[int(src.rows[i])],)
            return len(src.rows), get, lineage
        lal, ral = src.left.alias, src.right.alias

        def get(i, col):
            side = src.left if col.table == lal else src.right
            row = src.pairs[i, 0] if col.table == lal else src.pairs[i, 1]
            return side.rel.cells[int(row)][side.rel.attr(col.attr)]

        def lineage(i):
            return (src.left.rel.tids[int(src.pairs[i, 0])], src.right.rel.tids[int(src.pairs[i, 1])])
        if lal == ral:
            raise QCleanError("self-joins need distinct aliases")
        return len(src.pairs), get, lineage

    def _project(self, node: Project, src) -> ResultSet:
        if isinstance(src, ResultSet):
            where = {c: k for k, c in enumerate(src.columns)}
            idx = [where[str(it) if it.agg else str(it.col)] for it in node.items]
            return ResultSet(list(node.labels), [tuple(r[k] for k in idx) for r in src.rows], src.lineage)
        if isinstance(src, RowSet):
            rel = src.rel
            tids = np.asarray(rel.tids, dtype=np.int64)[src.rows]
            rows = src.rows[np.argsort(tids, kind="stable")]
            attrs = [rel.attr(it.col.attr) for it in node.items]
            cells = rel.cells
            out = [tuple(cells[r][a] for a in attrs) for r in rows.tolist()]
            return ResultSet(list(node.labels), out, [(rel.tids[r],) for r in rows.tolist()])
        n, get, lineage = self._getter(src)
        order = sorted(range(n), key=lineage)
        rows = [tuple(get(i, it.col) for it in node.items) for i in order]
        return ResultSet(list(node.labels), rows, [lineage(i) for i in order])

    def _group(self, node: GroupBy, src) -> ResultSet:
        n, get, _ = self._getter(src)
        groups: dict = {}
        for i in range(n):
            options = [[((), 1.0)]]
            for k in node.keys:
                options.append([((v,), w) for v, w in distribution(get(i, k)) if w > 0])
            combos = [((), 1.0)]
            for opts in options[1:]:
                combos = [(a + b, wa * wb) for a, wa in combos for b, wb in opts]
            for key, w in combos:
                g = groups.setdefault(key, {"w": 0.0, "acc": [_Agg() for _ in node.aggs]})
                g["w"] += w
                for agg, acc in zip(node.aggs, g["acc"]):
                    acc.add(_STAR if agg.col is None else get(i, agg.col), w)
        if not groups and not node.keys:
            groups[()] = {"w": 0.0, "acc": [_Agg() for _ in node.aggs]}
        keys = sorted(groups, key=lambda k: tuple((v is None, str(type(v)), "" if v is None else v) for v in k))
        labels = [str(k) for k in node.keys] + [str(a) for a in node.aggs]
        rows = []
        for k in keys:
            g = groups[k]
            rows.append(tuple(k) + tuple(acc.value(a.agg) for a, acc in zip(node.aggs, g["acc"])))
        return ResultSet(labels, rows, [])

    def stats_summary(self) -> list[dict]:
        return [s.summary() for s in self.stats.values()]


_STAR = object()


class _Agg:
    """Expected-value accumulator; MIN and MAX use each cell's most probable value."""

    def __init__(self):
        self.count = 0.0
        self.total = 0.0
        self.values = []

    def add(self, cell, w: float) -> None:
        if cell is _STAR:
            self.count += w
            return
        if cell is None:
            return
        dist = [(v, p) for v, p in distribution(cell) if v is not None]
        mass = sum(p for _, p in dist)
        if mass <= 0:
            return
        self.count += w * mass
        if all(isinstance(v, (int, float)) for v, _ in dist):
            self.total += w * sum(v * p for v, p in dist)
        self.values.append(most_probable(cell) if isinstance(cell, Uncertain) else cell)

    def value(self, agg: str):
        if agg == "COUNT":
            return self.count
        if agg == "SUM":
            return self.total
        if agg == "AVG":
            return self.total / self.count if self.count else None
        vals = [v for v in self.values if v is not None]
        if not vals:
            return None
        return min(vals) if agg == "MIN" else max(vals)


class _Ctx:
    def __init__(self, rec: QueryRecord, relations: set):
        self.rec = rec
        self.relations = relations
        self.costed: set = set()


def _walk(node):
    from .plan import walk

    return walk(node)


def _key_values(rel: Relation, rows: np.ndarray, a: int):
    """Flattened concrete join-key candidates with their rows, plus rows holding ranges."""
    col = rel.column(a)
    vals, owners, ranged = [], [], []
    certain = rows[~col.uncertain[rows] & ~col.null[rows]]
    uncertain = rows[col.uncertain[rows]]
    for r in uncertain.tolist():
        cell = rel.cells[r][a]
        for v in cell.concrete_values():
            if v is not None:
                vals.append(v)
                owners.append(r)
        if cell.has_range():
            ranged.append(r)
    base = col.orig[certain]
    if col.kind.numeric:
        allv = np.concatenate([base.astype(np.float64), np.asarray(vals, dtype=np.float64)])
    else:
        allv = np.concatenate([base, np.asarray(vals, dtype=object)]) if vals else base
    allr = np.concatenate([certain, np.asarray(owners, dtype=np.int64)])
    return allv, allr, ranged


__all__ = ["Session", "ResultSet", "QueryRecord", "RowSet", "JoinSet", "ScopeResult"]
