"""Incremental theta-join for two-tuple denial constraints.

The cartesian product of a relation with itself is laid out as a matrix whose
axes are equal-width value intervals of the DC's ordering attribute.  Only the
upper diagonal is tracked since a partition and its mirror hold the same
unordered pairs.  A tuple is *checked* for a DC once all of its pairs have
been examined; a partition is checked once it has no unexamined pair left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import RuleError
from .model import EPS, Relation
from .relax import DCViolation, ViolationSet
from .rules import Predicate, Rule, ordering_attr

_CHUNK = 4_000_000  # max pair evaluations per broadcast block


def _isqrt_exact(p: int) -> int:
    s = math.isqrt(p)
    if p < 1 or s * s != p:
        raise ValueError(f"partition count must be a perfect square >= 1, got {p}")
    return s


@dataclass
class ThetaMatrix:
    dc: str
    attr: str
    axis: np.ndarray  # sqrt(p) + 1 boundaries
    range_of: np.ndarray  # per row: axis interval index, -1 for null
    boxes: dict  # interval index -> {attr: (min, max)}
    checked: set = field(default_factory=set)  # partition coordinates (i, j), i <= j
    range_vio: dict = field(default_factory=dict)
    pruned: list = field(default_factory=list)  # (i, j, row tids, col tids) skipped on the last call

    @property
    def side(self) -> int:
        return len(self.axis) - 1

    @property
    def p(self) -> int:
        return self.side * self.side

    def coordinates(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.side) for j in range(i, self.side)]

    def unchecked_partitions(self) -> int:
        return sum(1 for c in self.coordinates() if c not in self.checked)

    def range_index(self, value: float) -> int:
        k = int(np.searchsorted(self.axis, value, side="right")) - 1
        return min(max(k, 0), self.side - 1)

    def refresh_checked(self, rel: Relation) -> None:
        done = rel.checked_mask(self.dc)
        full = []
        for k in range(self.side):
            members = self.range_of == k
            full.append(bool(done[members].all()))
        for i, j in self.coordinates():
            if full[i] or full[j]:
                self.checked.add((i, j))


def _dc_columns(rel: Relation, dc: Rule) -> dict:
    cols = {}
    for a in sorted(dc.attrs):
        col = rel.column(rel.attr(a))
        cols[a] = col.orig
    return cols


def _interval_index(values: np.ndarray, axis: np.ndarray) -> np.ndarray:
    side = len(axis) - 1
    idx = np.searchsorted(axis, values, side="right") - 1
    idx = np.clip(idx, 0, side - 1)
    idx[np.isnan(values)] = -1
    return idx


def _axis(values: np.ndarray, side: int) -> np.ndarray:
    finite = values[~np.isnan(values)]
    if not len(finite):
        return np.linspace(0.0, 1.0, side + 1)
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, side + 1)


def _boxes(cols: dict, idx: np.ndarray, side: int) -> dict:
    out = {}
    for k in range(side):
        members = idx == k
        box = {}
        for a, v in cols.items():
            if v.dtype.kind == "f" and members.any():
                sub = v[members]
                sub = sub[~np.isnan(sub)]
                box[a] = (float(sub.min()), float(sub.max())) if len(sub) else None
            else:
                box[a] = None
        out[k] = box
    return out


def build_theta_matrix(rel: Relation, dc: Rule, p: int = 64) -> ThetaMatrix:
    if dc.is_fd:
        raise RuleError(f"rule {dc.id} is an FD")
    attr = ordering_attr(dc)
    if not rel.schema.kind(attr).numeric:
        raise RuleError(f"ordering attribute {attr} of {dc.id} is not numeric")
    side = _isqrt_exact(p)
    values = rel.column(rel.attr(attr)).orig
    axis = _axis(values, side)
    idx = _interval_index(values, axis)
    m = ThetaMatrix(dc.id, attr, axis, idx, _boxes(_dc_columns(rel, dc), idx, side))
    m.refresh_checked(rel)
    return m


# ---------------------------------------------------------------------------
# vectorised atom evaluation


def _cmp(a: np.ndarray, op: str, b) -> np.ndarray:
    if a.dtype.kind == "f":
        with np.errstate(invalid="ignore"):
            eq = np.abs(a - b) <= EPS
            valid = ~(np.isnan(a) | np.isnan(b))
            if op == "=":
                return eq
            if op == "!=":
                return ~eq & valid
            if op == "<":
                return (a < b) & ~eq
            if op == "<=":
                return (a < b) | eq
            if op == ">":
                return (a > b) & ~eq
            if op == ">=":
                return (a > b) | eq
    else:
        valid = (a != None) & (b != None)  # noqa: E711
        if op == "=":
            return (a == b) & valid
        if op == "!=":
            return (a != b) & valid
    raise ValueError(f"unsupported operator {op!r} for column kind")


def _pairs_violating(cols: dict, dc: Rule, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Boolean matrix: row r1[x] as t1 and r2[y] as t2 satisfy every atom."""
    mask = np.ones((len(r1), len(r2)), dtype=bool)
    rows = (r1, r2)
    for atom in dc.body.atoms:
        left = cols[atom.left.attr][rows[atom.left.tuple_index - 1]]
        lshape = (-1, 1) if atom.left.tuple_index == 1 else (1, -1)
        left = left.reshape(lshape)
        if atom.is_pair:
            right = cols[atom.right.attr][rows[atom.right.tuple_index - 1]]
            right = right.reshape((-1, 1) if atom.right.tuple_index == 1 else (1, -1))
        else:
            right = atom.right
        mask &= _cmp(left, atom.op, right)
        if not mask.any():
            break
    return mask


def _box_admits(dc: Rule, b1: dict, b2: dict) -> bool:
    """Can some t1 in box b1 and t2 in box b2 satisfy all order atoms?"""
    boxes = (b1, b2)
    for atom in dc.body.atoms:
        if atom.op not in ("<", "<=", ">", ">="):
            continue
        lb = boxes[atom.left.tuple_index - 1].get(atom.left.attr)
        if lb is None:
            continue
        if atom.is_pair:
            rb = boxes[atom.right.tuple_index - 1].get(atom.right.attr)
            if rb is None:
                continue
        else:
            rb = (atom.right, atom.right)
        if atom.op == "<" and not lb[0] < rb[1] - EPS:
            return False
        if atom.op == "<=" and not lb[0] <= rb[1] + EPS:
            return False
        if atom.op == ">" and not lb[1] > rb[0] + EPS:
            return False
        if atom.op == ">=" and not lb[1] >= rb[0] - EPS:
            return False
    return True


def _box_of(cols: dict, rows: np.ndarray) -> dict:
    box = {}
    for a, v in cols.items():
        if v.dtype.kind == "f":
            sub = v[rows]
            sub = sub[~np.isnan(sub)]
            box[a] = (float(sub.min()), float(sub.max())) if len(sub) else None
        else:
            box[a] = None
    return box


def _order_filter(cols: dict, dc: Rule, rows: np.ndarray, role: int, other: dict) -> np.ndarray:
    """Keep rows (playing tuple ``role``) that could satisfy every order atom against ``other``."""
    keep = np.ones(len(rows), dtype=bool)
    for atom in dc.body.atoms:
        if not atom.is_pair or atom.op not in ("<", "<=", ">", ">="):
            continue
        if atom.left.tuple_index == role:
            mine, theirs, op = atom.left.attr, atom.right.attr, atom.op
        else:
            mine, theirs, op = atom.right.attr, atom.left.attr, _flip(atom.op)
        ob = other.get(theirs)
        if ob is None:
            continue
        v = cols[mine][rows]
        with np.errstate(invalid="ignore"):
            if op in ("<", "<="):
                keep &= v <= ob[1] + EPS
            else:
                keep &= v >= ob[0] - EPS
    return keep


def _flip(op: str) -> str:
    return {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[op]


def partial_theta_join_rows(matrix: ThetaMatrix, rel: Relation, rows: Iterable[int], dc: Rule) -> ViolationSet:
    """Violations between unchecked ``rows`` and every unchecked tuple.

    Pairs are grouped by the matrix intervals of both sides; an interval pair
    whose bounding boxes cannot satisfy the DC under either tuple assignment
    is skipped, and within the rest only rows inside the partner's bounds are
    compared.  Examined rows become checked.
    """
    cols = _dc_columns(rel, dc)
    rows = np.unique(np.asarray(list(rows), dtype=np.int64))
    done = rel.checked_mask(dc.id)
    rows = rows[~done[rows]]
    matrix.pruned = []
    found: set = set()
    if len(rows):
        others = np.flatnonzero(~done)
        r_idx, c_idx = matrix.range_of[rows], matrix.range_of[others]
        for i in np.unique(r_idx):
            if i < 0:
                continue
            ri = rows[r_idx == i]
            bi = _box_of(cols, ri)
            for j in np.unique(c_idx):
                if j < 0:
                    continue
                cj = others[c_idx == j]
                bj = _box_of(cols, cj)
                fwd, back = _box_admits(dc, bi, bj), _box_admits(dc, bj, bi)
                if not (fwd or back):
                    matrix.pruned.append((int(i), int(j), frozenset(rel.tids_of(ri)), frozenset(rel.tids_of(cj))))
                    continue
                if fwd:
                    a = ri[_order_filter(cols, dc, ri, 1, bj)]
                    b = cj[_order_filter(cols, dc, cj, 2, bi)]
                    _scan_one(cols, dc, rel, a, b, found)
                if back:
                    a = cj[_order_filter(cols, dc, cj, 1, bi)]
                    b = ri[_order_filter(cols, dc, ri, 2, bj)]
                    _scan_one(cols, dc, rel, a, b, found)
        rel.mark_checked(dc.id, rows)
        matrix.refresh_checked(rel)
    vs = ViolationSet()
    if found:
        every = tuple(range(len(dc.body.atoms)))
        vs.dc[dc.id] = [DCViolation(a, b, every) for a, b in sorted(found)]
    return vs


def _scan_one(cols, dc, rel, t1_rows, t2_rows, found):
    if not len(t1_rows) or not len(t2_rows):
        return
    tids = np.asarray(rel.tids, dtype=np.int64)
    step = max(1, _CHUNK // len(t2_rows))
    for s in range(0, len(t1_rows), step):
        a = t1_rows[s:s + step]
        m = _pairs_violating(cols, dc, a, t2_rows)
        xs, ys = np.nonzero(m)
        for x, y in zip(a[xs].tolist(), t2_rows[ys].tolist()):
            if x != y:
                found.add((int(tids[x]), int(tids[y])))


def partial_theta_join(matrix: ThetaMatrix, rel: Relation, query_region: tuple, dc: Rule) -> ViolationSet:
    """Violations involving tuples whose ordering value lies in ``[lo, hi]``."""
    lo, hi = query_region
    values = rel.column(rel.attr(matrix.attr)).orig
    with np.errstate(invalid="ignore"):
        rows = np.flatnonzero((values >= lo - EPS) & (values <= hi + EPS))
    return partial_theta_join_rows(matrix, rel, rows, dc)


def brute_force_dc(rel: Relation, dc: Rule, rows: Iterable[int] | None = None) -> set:
    """All ordered violating (t1, t2) pairs among ``rows`` (default: all)."""
    cols = _dc_columns(rel, dc)
    rows = np.arange(len(rel)) if rows is None else np.asarray(list(rows), dtype=np.int64)
    found: set = set()
    _scan_one(cols, dc, rel, rows, rows, found)
    return found


# ---------------------------------------------------------------------------
# accuracy estimation


def _second_order_atom(dc: Rule) -> Predicate | None:
    order = dc.body.order_atoms()
    return dc.body.atoms[order[1]] if len(order) > 1 else None


def estimate_errors(rel: Relation, p: int, dc: Rule, matrix: ThetaMatrix | None = None) -> dict:
    """Estimated violation counts per off-diagonal interval pair ``(i, j)``, ``i < j``.

    Tuples of the lower interval L pair with those of the upper interval U
    through the ordering atom; the second inequality atom decides which
    part of their value ranges can conflict, and the estimate is the
    smaller of the two sides' tuple counts inside that overlap.
    """
    m = matrix if matrix is not None else build_theta_matrix(rel, dc, p)
    first = dc.body.atoms[dc.body.order_atoms()[0]]
    second = _second_order_atom(dc)
    out: dict = {}
    side = m.side
    members = [np.flatnonzero(m.range_of == k) for k in range(side)]
    if second is None:
        for i in range(side):
            for j in range(i + 1, side):
                n = min(len(members[i]), len(members[j]))
                if n:
                    out[(i, j)] = n
        m.range_vio = out
        return out
    col = rel.column(rel.attr(second.left.attr)).orig
    # express the second atom as "L.B op U.B"
    op = second.op
    lower_is_t1 = first.op in ("<", "<=")
    if second.left.tuple_index == 2:
        op = _flip(op)
    if not lower_is_t1:
        op = _flip(op)
    for i in range(side):
        li = col[members[i]]
        li = li[~np.isnan(li)]
        for j in range(i + 1, side):
            uj = col[members[j]]
            uj = uj[~np.isnan(uj)]
            if not len(li) or not len(uj):
                continue
            if op in (">", ">="):
                lo, hi = uj.min(), li.max()
                if lo > hi or (op == ">" and lo == hi):
                    continue
                n = min(int((li > lo - EPS).sum() if op == ">=" else (li > lo).sum()),
                        int((uj < hi + EPS).sum() if op == ">=" else (uj < hi).sum()))
            else:
                lo, hi = li.min(), uj.max()
                if lo > hi or (op == "<" and lo == hi):
                    continue
                n = min(int((li < hi).sum() if op == "<" else (li <= hi).sum()),
                        int((uj > lo).sum() if op == "<" else (uj >= lo).sum()))
            if n:
                out[(i, j)] = n
    m.range_vio = out
    return out


def estimate_accuracy(range_vio: dict, result_size: int, result_range: int,
                      p: int = 64, unchecked: int = 0) -> tuple[float, float]:
    """(accuracy, support) of a query answer lying in interval ``result_range``.

    Only partitions entirely before or entirely after the answer's interval
    contribute errors.  Support is the checked share of the upper-diagonal
    partitions.
    """
    if result_size < 0:
        raise ValueError("result size must be non-negative")
    side = _isqrt_exact(p)
    if not 0 <= result_range < side:
        raise ValueError(f"result range {result_range} outside 0..{side - 1}")
    errors = 0
    for (i, j), v in range_vio.items():
        if (i < result_range and j < result_range) or (i > result_range and j > result_range):
            errors += v
    accuracy = 1.0 if result_size + errors == 0 else errors / (result_size + errors)
    total = side * (side + 1) // 2
    if not 0 <= unchecked <= total:
        raise ValueError(f"unchecked partitions {unchecked} outside 0..{total}")
    return accuracy, (total - unchecked) / total


__all__ = ["ThetaMatrix", "build_theta_matrix", "partial_theta_join", "partial_theta_join_rows",
           "brute_force_dc", "estimate_errors", "estimate_accuracy"]
