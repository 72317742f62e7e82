"""Query-result relaxation and FD violation detection.

Relaxation augments a query answer with correlated tuples: tuples sharing an
lhs or rhs value with the (growing) answer.  Detection hash-groups tuples on
their original lhs value.  Both work on per-row integer codes of the original
values; uncertain cells additionally match through their concrete candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import RuleError, StatisticsError
from .model import Range, Relation, Uncertain, Value
from .rules import Rule


@dataclass(frozen=True)
class RelaxationResult:
    extra: frozenset
    iterations: int
    # per iteration: (tids added by the lhs step, tids added by the rhs step)
    steps: tuple = ()

    @property
    def added_counts(self) -> list[int]:
        return [len(a) + len(b) for a, b in self.steps]


@dataclass(frozen=True)
class FDGroup:
    lhs: tuple
    rhs: Mapping  # rhs value -> frozenset of tids

    @property
    def tids(self) -> frozenset:
        out: set = set()
        for t in self.rhs.values():
            out |= t
        return frozenset(out)


@dataclass(frozen=True)
class DCViolation:
    t1: int
    t2: int
    atoms: tuple  # indices of the violated atoms

    @property
    def pair(self) -> frozenset:
        return frozenset((self.t1, self.t2))


@dataclass
class ViolationSet:
    fd: dict = field(default_factory=dict)  # rule id -> list[FDGroup]
    dc: dict = field(default_factory=dict)  # rule id -> list[DCViolation]

    def count(self) -> int:
        return sum(len(v) for v in self.fd.values()) + sum(len(v) for v in self.dc.values())

    def __bool__(self) -> bool:
        return self.count() > 0

    def tids(self) -> set:
        out: set = set()
        for groups in self.fd.values():
            for g in groups:
                out |= g.tids
        for pairs in self.dc.values():
            for v in pairs:
                out.update((v.t1, v.t2))
        return out


# ---------------------------------------------------------------------------
# key codes including candidate values


def _fd_attrs(rel: Relation, fd: Rule) -> tuple[tuple, int]:
    if not fd.is_fd:
        raise RuleError(f"rule {fd.id} is not an FD")
    if fd.relation != rel.name:
        raise RuleError(f"rule {fd.id} is bound to {fd.relation!r}, not {rel.name!r}")
    return tuple(rel.attr(a) for a in fd.body.lhs), rel.attr(fd.body.rhs)


class SideKeys:
    """Original key codes of one FD side plus codes reachable through candidates."""

    def __init__(self, rel: Relation, attrs: Sequence[int]):
        self.rel = rel
        self.attrs = tuple(attrs)
        self.codes, self.lookup = rel.key_codes(self.attrs)
        if len(self.attrs) == 1:
            rows, codes = rel.column(self.attrs[0]).cand_codes()
            keep = codes >= 0
            self.extra_rows, self.extra_codes = rows[keep], codes[keep]
        else:
            self.extra_rows, self.extra_codes = self._composite_extras()

    def _composite_extras(self):
        rel = self.rel
        uncertain = np.zeros(len(rel), dtype=bool)
        for a in self.attrs:
            uncertain |= rel.column(a).uncertain
        rows, codes = [], []
        for r in np.flatnonzero(uncertain):
            options = []
            for a in self.attrs:
                c = rel.cells[r][a]
                if isinstance(c, Uncertain):
                    options.append(sorted(c.concrete_values(), key=repr))
                else:
                    options.append([c])
            for combo in product(*options):
                if any(v is None for v in combo):
                    continue
                code = self.lookup.get(combo)
                if code is None:
                    code = self.lookup[combo] = len(self.lookup)
                rows.append(int(r))
                codes.append(code)
        return np.asarray(rows, dtype=np.int64), np.asarray(codes, dtype=np.int64)

    def values_of(self, mask: np.ndarray) -> np.ndarray:
        base = self.codes[mask]
        if len(self.extra_rows):
            base = np.concatenate([base, self.extra_codes[mask[self.extra_rows]]])
        base = np.unique(base)
        return base[base >= 0]

    def matching(self, values: np.ndarray) -> np.ndarray:
        hit = np.isin(self.codes, values) & (self.codes >= 0)
        if len(self.extra_rows):
            sel = np.isin(self.extra_codes, values)
            hit[self.extra_rows[sel]] = True
        return hit


def relax_fd(rel: Relation, answer: Iterable[int], fd: Rule) -> RelaxationResult:
    """Correlated tuples of ``answer`` under ``fd``.

    Each iteration takes the lhs and rhs values of the current answer, adds
    the unvisited tuples sharing an lhs value, then the unvisited tuples
    sharing an rhs value.  The loop stops once an rhs step adds nothing.
    """
    lhs_attrs, rhs_attr = _fd_attrs(rel, fd)
    in_a = np.zeros(len(rel), dtype=bool)
    rows = rel.rows_of(answer)
    in_a[rows] = True
    lhs = SideKeys(rel, lhs_attrs)
    rhs = SideKeys(rel, (rhs_attr,))
    unvisited = ~in_a
    steps = []
    total = np.zeros(len(rel), dtype=bool)
    while True:
        a_lhs = lhs.values_of(in_a)
        a_rhs = rhs.values_of(in_a)
        by_lhs = unvisited & lhs.matching(a_lhs)
        unvisited &= ~by_lhs
        by_rhs = unvisited & rhs.matching(a_rhs)
        unvisited &= ~by_rhs
        in_a |= by_lhs | by_rhs
        total |= by_lhs | by_rhs
        steps.append((frozenset(rel.tids_of(np.flatnonzero(by_lhs))),
                      frozenset(rel.tids_of(np.flatnonzero(by_rhs)))))
        if not by_rhs.any():
            break
    return RelaxationResult(frozenset(rel.tids_of(np.flatnonzero(total))), len(steps), tuple(steps))


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def extra_iteration_probability(n: int, num_vio: int, ar: int) -> float:
    """Hypergeometric probability that a relaxed answer of size ``ar`` holds a violation.

    ``1 - C(n - num_vio, ar) / C(n, ar)``.
    """
    if ar > n:
        raise ValueError(f"relaxed answer size {ar} exceeds dataset size {n}")
    if not (0 <= num_vio <= n) or ar < 0:
        raise ValueError("need 0 <= num_vio <= n and ar >= 0")
    if ar > n - num_vio:
        return 1.0
    if num_vio == 0 or ar == 0:
        return 0.0
    if n <= 2000:
        return float(1 - Fraction(math.comb(n - num_vio, ar), math.comb(n, ar)))
    log_ratio = _log_comb(n - num_vio, ar) - _log_comb(n, ar)
    return -math.expm1(log_ratio)


def relaxed_size_upper_bound(fd_attrs: Sequence[str], dataset_freq: Mapping[str, Mapping],
                             result_freq: Mapping[str, Mapping]) -> int:
    """Worst-case number of correlated tuples one relaxation iteration can add.

    Sums, over the rule attributes and over the values present in the result,
    the dataset frequency minus the result frequency.
    """
    total = 0
    for attr in fd_attrs:
        d = dataset_freq.get(attr, {})
        for value, dq in result_freq.get(attr, {}).items():
            if value not in d:
                raise StatisticsError(f"value {value!r} of {attr} appears in the result but not the dataset")
            if d[value] < dq:
                raise StatisticsError(f"{attr}={value!r}: result frequency {dq} exceeds dataset frequency {d[value]}")
            total += d[value] - dq
    return total


def value_frequencies(rel: Relation, tids: Iterable[int] | None, attrs: Sequence[str]) -> dict:
    """Per attribute value -> number of tuples whose candidate set contains the value."""
    rows = range(len(rel)) if tids is None else rel.rows_of(tids)
    out: dict = {a: {} for a in attrs}
    idx = {a: rel.attr(a) for a in attrs}
    for r in rows:
        for a in attrs:
            c = rel.cells[int(r)][idx[a]]
            vals = c.concrete_values() if isinstance(c, Uncertain) else ({c} if c is not None else set())
            for v in vals:
                out[a][v] = out[a].get(v, 0) + 1
    return out


def lhs_group_rows(rel: Relation, rows: np.ndarray, fd: Rule) -> np.ndarray:
    """All rows whose original lhs equals the original lhs of some row in ``rows``."""
    lhs_attrs, _ = _fd_attrs(rel, fd)
    codes, _ = rel.key_codes(lhs_attrs)
    wanted = np.unique(codes[rows])
    wanted = wanted[wanted >= 0]
    return np.flatnonzero(np.isin(codes, wanted))


def detect_fd_violations(rel: Relation, scope: Iterable[int], fd: Rule,
                         skip_checked: bool = True) -> ViolationSet:
    """Group unchecked scope tuples by original lhs; keep groups with >= 2 rhs values."""
    lhs_attrs, rhs_attr = _fd_attrs(rel, fd)
    rows = np.unique(rel.rows_of(scope))
    if skip_checked and fd.id in rel.checked:
        rows = rows[~rel.checked_mask(fd.id)[rows]]
    lcodes, _ = rel.key_codes(lhs_attrs)
    rcodes, _ = rel.key_codes((rhs_attr,))
    rows = rows[(lcodes[rows] >= 0) & (rcodes[rows] >= 0)]
    groups = []
    if len(rows):
        order = np.lexsort((rcodes[rows], lcodes[rows]))
        rows = rows[order]
        lc = lcodes[rows]
        bounds = np.flatnonzero(np.diff(lc)) + 1
        for chunk in np.split(rows, bounds):
            rc = rcodes[chunk]
            if rc[0] == rc[-1]:
                continue
            by_rhs: dict[Value, set] = {}
            for r in chunk:
                by_rhs.setdefault(rel.original(int(r), rhs_attr), set()).add(rel.tids[int(r)])
            lhs_val = tuple(rel.original(int(chunk[0]), a) for a in lhs_attrs)
            groups.append(FDGroup(lhs_val, {k: frozenset(v) for k, v in by_rhs.items()}))
    groups.sort(key=lambda g: min(g.tids))
    vs = ViolationSet()
    if groups:
        vs.fd[fd.id] = groups
    return vs


__all__ = ["RelaxationResult", "FDGroup", "DCViolation", "ViolationSet", "SideKeys", "relax_fd",
           "extra_iteration_probability", "relaxed_size_upper_bound", "value_frequencies",
           "lhs_group_rows", "detect_fd_violations", "Range"]
