"""Frequency-based candidate fixes for FD and DC violations, and their merge.

Candidate probabilities are witness frequencies: every candidate carries the
set of tuples (its provenance) that support it, and its probability is the
size of that set over the total witness count of its pair_id group.  Merging
fixes from several rules unions witness sets, so merge order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import RepairError
from .model import Candidate, Cell, Range, Relation, Uncertain, Value, compare, value_key
from .relax import DCViolation, FDGroup
from .rules import Predicate, Rule

SIDES = ("lhs", "rhs")


def pair_id(tid: int, rules: Iterable[str], side: str) -> str:
    return f"{tid}:{'+'.join(sorted(set(rules)))}:{side}"


def split_pair_id(pid: str) -> tuple[int, tuple, str]:
    tid, rules, side = pid.split(":")
    return int(tid), tuple(rules.split("+")), side


@dataclass
class FixSet:
    """Replacement cells keyed by (tid, attribute name)."""

    cells: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator:
        return iter(sorted(self.cells.items(), key=lambda kv: (kv[0][0], kv[0][1])))

    def add(self, tid: int, attr: str, cell: Uncertain) -> None:
        key = (tid, attr)
        old = self.cells.get(key)
        self.cells[key] = cell if old is None else merge_fixes(old, cell)

    def update(self, other: "FixSet") -> "FixSet":
        for (tid, attr), cell in other.cells.items():
            self.add(tid, attr, cell)
        return self

    def validate(self) -> None:
        for cell in self.cells.values():
            cell.validate()


def _weights(witnesses: Mapping) -> list[tuple]:
    """Sorted ``(value, prob, provenance)`` triples; uniform when no witness is known."""
    total = sum(len(w) for w in witnesses.values())
    if total == 0:
        return [(v, 1 / len(witnesses), frozenset()) for v in sorted(witnesses, key=value_key)]
    return [(v, len(w) / total, frozenset(w)) for v, w in sorted(witnesses.items(), key=lambda kv: value_key(kv[0]))]


def _group(original: Value, witnesses: Mapping, pid: str) -> list[Candidate]:
    return [Candidate(v, p, pid, w) for v, p, w in _weights(witnesses)]


# ---------------------------------------------------------------------------
# FD fixes


class FDIndex:
    """Original-value co-occurrence index for one FD over a whole relation.

    ``by_lhs[lhs_tuple][rhs_value]`` and ``by_rhs[rhs_value][lhs_tuple]`` map
    to the tids carrying both values.
    """

    def __init__(self, rel: Relation, fd: Rule, rows: np.ndarray | None = None):
        self.rule = fd
        self.lhs_attrs = tuple(rel.attr(a) for a in fd.body.lhs)
        self.rhs_attr = rel.attr(fd.body.rhs)
        lcodes, llook = rel.key_codes(self.lhs_attrs)
        rcodes, rlook = rel.key_codes((self.rhs_attr,))
        lval = {c: k for k, c in llook.items()}
        rval = {c: k[0] for k, c in rlook.items()}
        if rows is None:
            rows = np.arange(len(rel))
        rows = rows[(lcodes[rows] >= 0) & (rcodes[rows] >= 0)]
        self.by_lhs: dict = {}
        self.by_rhs: dict = {}
        if not len(rows):
            return
        width = int(rcodes.max()) + 1
        key = lcodes[rows] * width + rcodes[rows]
        order = np.argsort(key, kind="stable")
        rows, key = rows[order], key[order]
        starts = np.flatnonzero(np.r_[True, np.diff(key) != 0])
        ends = np.r_[starts[1:], len(rows)]
        tids = np.asarray(rel.tids, dtype=np.int64)
        for s, e in zip(starts, ends):
            k = int(key[s])
            lv, rv = lval[k // width], rval[k % width]
            w = frozenset(tids[rows[s:e]].tolist())
            self.by_lhs.setdefault(lv, {})[rv] = w
            self.by_rhs.setdefault(rv, {})[lv] = w


def fd_fixes(rel: Relation, group: FDGroup, fd: Rule, index: FDIndex | None = None) -> FixSet:
    """Candidate fixes for every member of one FD violation group.

    The rhs cell gets the rhs values seen with the member's lhs; the lhs
    cell gets the lhs values seen with the member's rhs when that rhs
    co-occurs with more than one lhs value.  A multi-attribute lhs gets one
    marginal group per attribute that varies, all sharing the pair_id.
    """
    if index is None:
        index = FDIndex(rel, fd)
    if not index.by_lhs:
        raise RepairError(f"no correlated tuples available for rule {fd.id}")
    lhs_names, rhs_name = fd.body.lhs, fd.body.rhs
    out = FixSet()
    rhs_w = index.by_lhs.get(tuple(group.lhs))
    if rhs_w is None:
        raise RepairError(f"lhs value {group.lhs!r} missing from the correlated tuples of {fd.id}")
    rhs_group = _weights(rhs_w) if len(rhs_w) > 1 else None
    for rhs_value, members in sorted(group.rhs.items(), key=lambda kv: value_key(kv[0])):
        lhs_w = index.by_rhs.get(rhs_value, {})
        marginals = []
        if len(lhs_w) > 1:
            for k, attr in enumerate(lhs_names):
                marginal: dict = {}
                for lv, w in lhs_w.items():
                    marginal[lv[k]] = marginal.get(lv[k], frozenset()) | w
                if len(marginal) > 1:
                    marginals.append((attr, group.lhs[k], _weights(marginal)))
        for tid in sorted(members):
            if rhs_group is not None:
                pid = pair_id(tid, [fd.id], "rhs")
                out.add(tid, rhs_name, Uncertain(rhs_value, tuple(Candidate(v, p, pid, w) for v, p, w in rhs_group)))
            if marginals:
                pid = pair_id(tid, [fd.id], "lhs")
                for attr, orig, weights in marginals:
                    out.add(tid, attr, Uncertain(orig, tuple(Candidate(v, p, pid, w) for v, p, w in weights)))
    return out


# ---------------------------------------------------------------------------
# DC fixes


def _atom_holds(rel: Relation, atom: Predicate, rows: tuple[int, int]) -> bool:
    left = rel.original(rows[atom.left.tuple_index - 1], rel.attr(atom.left.attr))
    if atom.is_pair:
        right = rel.original(rows[atom.right.tuple_index - 1], rel.attr(atom.right.attr))
    else:
        right = atom.right
    return compare(left, atom.op, right)


def violated_atoms(rel: Relation, dc: Rule, t1: int, t2: int) -> tuple | None:
    """Atom indices if (t1, t2) violates ``dc`` on original values, else None."""
    rows = (rel.row_of[t1], rel.row_of[t2])
    if t1 == t2:
        return None
    if all(_atom_holds(rel, a, rows) for a in dc.body.atoms):
        return tuple(range(len(dc.body.atoms)))
    return None


_UPPER = {"<": ">", "<=": ">", ">": "<", ">=": "<"}
_LOWER = {"<": "<", "<=": "<", ">": ">", ">=": ">"}
_COMPLEMENT = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _inversions(rel: Relation, atom: Predicate, rows: tuple[int, int], tids: tuple[int, int]):
    """(tid, attr, original, alternative, partner) for each side an atom can be broken on.

    For ``t1.a < t2.a`` the first tuple may move above the second's value and
    the second below the first's, written as strict ranges.
    """
    li = atom.left.tuple_index - 1
    lval = rel.original(rows[li], rel.attr(atom.left.attr))
    if not atom.is_pair:
        if atom.op in _COMPLEMENT:
            yield tids[li], atom.left.attr, lval, Range(_COMPLEMENT[atom.op], atom.right), tids[1 - li]
        return
    ri = atom.right.tuple_index - 1
    rval = rel.original(rows[ri], rel.attr(atom.right.attr))
    if atom.op in _UPPER:
        yield tids[li], atom.left.attr, lval, Range(_UPPER[atom.op], rval), tids[ri]
        yield tids[ri], atom.right.attr, rval, Range(_LOWER[atom.op], lval), tids[li]
    elif atom.op == "!=":
        yield tids[li], atom.left.attr, lval, rval, tids[ri]
        yield tids[ri], atom.right.attr, rval, lval, tids[li]
    # an equality atom has no finite alternative to offer


def dc_fixes(rel: Relation, violation: DCViolation, dc: Rule) -> FixSet:
    """Per-atom candidate groups for one violating ordered pair.

    Each atom contributes a group ``{original, inverted}`` on both tuples,
    witnessed by the partner tuple.  DCs with more than two atoms also have
    attribute combinations, see :func:`multi_atom_combinations`.
    """
    t1, t2 = violation.t1, violation.t2
    atoms = violated_atoms(rel, dc, t1, t2)
    if atoms is None:
        raise RepairError(f"pair ({t1}, {t2}) does not violate {dc.id}")
    rows = (rel.row_of[t1], rel.row_of[t2])
    out = FixSet()
    for k in atoms:
        for tid, attr, orig, alt, partner in _inversions(rel, dc.body.atoms[k], rows, (t1, t2)):
            if orig is None:
                continue
            pid = pair_id(tid, [dc.id], f"atom-{k}")
            w = frozenset((partner,))
            out.add(tid, attr, Uncertain(orig, tuple(_group(orig, {orig: w, alt: w}, pid))))
    return out


def multi_atom_combinations(rel: Relation, violation: DCViolation, dc: Rule,
                            atoms: Iterable[int] | None = None) -> list[FixSet]:
    """One FixSet per non-empty subset of violated atoms, smallest subsets first.

    A combination changes exactly the attributes of its atoms: each affected
    cell holds the inverted condition as a single range (or value) candidate.
    These are inputs for a downstream solver and are never applied directly.
    """
    t1, t2 = violation.t1, violation.t2
    atoms = tuple(violation.atoms if atoms is None else atoms)
    rows = (rel.row_of[t1], rel.row_of[t2])
    out = []
    for size in range(1, len(atoms) + 1):
        for subset in combinations(atoms, size):
            fs = FixSet()
            side = "combo-" + "-".join(str(k) for k in subset)
            for k in subset:
                for tid, attr, orig, alt, partner in _inversions(rel, dc.body.atoms[k], rows, (t1, t2)):
                    pid = pair_id(tid, [dc.id], side)
                    fs.cells[(tid, attr)] = Uncertain(orig, (Candidate(alt, 1.0, pid, frozenset((partner,))),))
            out.append(fs)
    return out


# ---------------------------------------------------------------------------
# merging


def _merge_key(pid: str) -> tuple:
    tid, rules, side = split_pair_id(pid)
    if side in SIDES:
        return (tid, side)
    return (pid,)


def merge_fixes(existing: Cell, incoming: Uncertain | None) -> Cell:
    """Combine two fix cells for the same (tid, attribute).

    Same-side FD groups (all lhs or all rhs fixes of a tuple) merge into one
    group whose witnesses are the union of the rules' witnesses.  Groups of
    the same DC atom merge the same way.  Everything else is kept side by side.
    """
    if incoming is None or (isinstance(incoming, Uncertain) and not incoming.candidates):
        return existing
    if not isinstance(existing, Uncertain):
        if existing != incoming.original:
            raise RepairError(f"fix for original {incoming.original!r} applied to cell {existing!r}")
        return incoming
    if existing.original != incoming.original:
        raise RepairError(f"cannot merge fixes of different cells ({existing.original!r} vs {incoming.original!r})")
    merged: dict = {}
    for c in existing.candidates + incoming.candidates:
        key = _merge_key(c.pair_id)
        slot = merged.setdefault(key, {"rules": set(), "w": {}, "pid": c.pair_id})
        tid, rules, side = split_pair_id(c.pair_id)
        slot["rules"].update(rules)
        slot["w"][c.value] = slot["w"].get(c.value, frozenset()) | c.provenance
        slot["side"], slot["tid"] = side, tid
    cands = []
    for key, slot in merged.items():
        pid = pair_id(slot["tid"], slot["rules"], slot["side"]) if len(key) == 2 else slot["pid"]
        cands.extend(_group(existing.original, slot["w"], pid))
    return Uncertain(existing.original, tuple(cands))


__all__ = ["FixSet", "FDIndex", "fd_fixes", "dc_fixes", "violated_atoms", "multi_atom_combinations",
           "merge_fixes", "pair_id", "split_pair_id"]
