"""Probabilistic relational data model.

A cell is either a plain scalar (certain) or an :class:`Uncertain` holding
candidate fixes.  Candidates that share a ``pair_id`` form one possible-world
group for that cell; their probabilities sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import SchemaError, TypeMismatchError, ValidationError

EPS = 1e-9
PROB_TOL = 1e-9

Value = Union[int, float, str, None]

OPS = ("=", "!=", "<", "<=", ">", ">=")
_OP_ALIASES = {"=": "=", "==": "=", "!=": "!=", "<>": "!=", "≠": "!=", "<": "<",
               "<=": "<=", "≤": "<=", ">": ">", ">=": ">=", "≥": ">="}
ORDER_OPS = ("<", "<=", ">", ">=")


def canonical_op(op: str) -> str:
    try:
        return _OP_ALIASES[op]
    except KeyError:
        raise ValueError(f"unknown comparison operator {op!r}") from None


class Kind(str, Enum):
    INT = "int"
    FLOAT = "float"
    TEXT = "text"

    @property
    def numeric(self) -> bool:
        return self is not Kind.TEXT

    @classmethod
    def parse(cls, text: str) -> "Kind":
        aliases = {"int": cls.INT, "integer": cls.INT, "float": cls.FLOAT, "real": cls.FLOAT,
                   "double": cls.FLOAT, "text": cls.TEXT, "str": cls.TEXT, "string": cls.TEXT}
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise SchemaError(f"unknown attribute kind {text!r}") from None


def _is_num(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def check_compatible(value: Value, kind: Kind | None) -> None:
    """Raise TypeMismatchError when ``value`` cannot be compared with ``kind``."""
    if value is None or kind is None:
        return
    if kind.numeric != _is_num(value):
        raise TypeMismatchError(f"value {value!r} is not compatible with attribute kind {kind.value}")


def compare(a: Value, op: str, b: Value) -> bool:
    """Scalar comparison with absolute-epsilon float equality.

    Null never satisfies any comparison.  Text and numbers are never
    comparable.
    """
    if a is None or b is None:
        return False
    an, bn = _is_num(a), _is_num(b)
    if an != bn:
        raise TypeMismatchError(f"cannot compare {a!r} with {b!r}")
    if an:
        eq = abs(a - b) <= EPS
        if op == "=":
            return eq
        if op == "!=":
            return not eq
        if op == "<":
            return a < b and not eq
        if op == "<=":
            return a < b or eq
        if op == ">":
            return a > b and not eq
        if op == ">=":
            return a > b or eq
    else:
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
    raise ValueError(f"unknown comparison operator {op!r}")


# --------------------------------------------------------------------------
# Intervals over the reals, used for range candidates.

@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_c = self.lo, self.lo_closed
        else:
            lo, lo_c = other.lo, other.lo_closed
        if self.lo == other.lo:
            lo_c = self.lo_closed and other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_c = self.hi, self.hi_closed
        else:
            hi, hi_c = other.hi, other.hi_closed
        if self.hi == other.hi:
            hi_c = self.hi_closed and other.hi_closed
        return Interval(lo, hi, lo_c, hi_c)


def predicate_intervals(op: str, lit: float) -> list[Interval]:
    """The set {x : x op lit} as a union of intervals."""
    if op == "=":
        return [Interval(lit, lit, True, True)]
    if op == "!=":
        return [Interval(hi=lit), Interval(lo=lit)]
    if op == "<":
        return [Interval(hi=lit)]
    if op == "<=":
        return [Interval(hi=lit, hi_closed=True)]
    if op == ">":
        return [Interval(lo=lit)]
    if op == ">=":
        return [Interval(lo=lit, lo_closed=True)]
    raise ValueError(f"unknown comparison operator {op!r}")


@dataclass(frozen=True)
class Range:
    """Half-open numeric range candidate, e.g. ``Range('<', 2000)`` for x < 2000."""

    op: str
    bound: float

    def __post_init__(self):
        if self.op not in ORDER_OPS:
            raise ValueError(f"range operator must be one of {ORDER_OPS}, got {self.op!r}")
        if not _is_num(self.bound):
            raise TypeMismatchError(f"range bound must be numeric, got {self.bound!r}")

    def interval(self) -> Interval:
        return predicate_intervals(self.op, self.bound)[0]

    def contains(self, x: Value) -> bool:
        return compare(x, self.op, self.bound)

    def __str__(self) -> str:
        return f"{self.op}{_fmt_scalar(self.bound)}"


CandidateValue = Union[Value, Range]


def value_key(v: CandidateValue) -> tuple:
    """Total order over candidate values: concrete before ranges, then by value."""
    if isinstance(v, Range):
        return (2, float(v.bound), v.op)
    if v is None:
        return (0, 0)
    if _is_num(v):
        return (1, 0, float(v))
    return (1, 1, v)


@dataclass(frozen=True)
class Candidate:
    value: CandidateValue
    prob: float
    pair_id: str
    provenance: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not (0.0 < self.prob <= 1.0 + PROB_TOL):
            raise ValidationError(f"candidate probability {self.prob} outside (0, 1]")


@dataclass(frozen=True)
class Uncertain:
    """An uncertain cell.  ``original`` is the dirty value it replaced."""

    original: Value
    candidates: tuple

    def __post_init__(self):
        ordered = tuple(sorted(self.candidates, key=lambda c: (c.pair_id, value_key(c.value))))
        object.__setattr__(self, "candidates", ordered)

    def groups(self) -> dict[str, list[Candidate]]:
        out: dict[str, list[Candidate]] = {}
        for c in self.candidates:
            out.setdefault(c.pair_id, []).append(c)
        return out

    def concrete_values(self) -> set:
        return {c.value for c in self.candidates if not isinstance(c.value, Range)}

    def has_range(self) -> bool:
        return any(isinstance(c.value, Range) for c in self.candidates)

    def validate(self) -> None:
        if not self.candidates:
            raise ValidationError("uncertain cell without candidates")
        multi = False
        for pid, cands in self.groups().items():
            total = math.fsum(c.prob for c in cands)
            if abs(total - 1.0) > PROB_TOL:
                raise ValidationError(f"pair group {pid} probabilities sum to {total}, not 1")
            if len(cands) >= 2:
                multi = True
        if not multi and not self.has_range():
            raise ValidationError("uncertain cell has no group with two candidates and no range")

    def __str__(self) -> str:
        return " | ".join(f"{_fmt_cand(c.value)} {c.prob:.0%}" for c in self.candidates)


Cell = Union[Value, Uncertain]


def original_value(cell: Cell) -> Value:
    return cell.original if isinstance(cell, Uncertain) else cell


def _fmt_scalar(v) -> str:
    return str(v)


def _fmt_cand(v: CandidateValue) -> str:
    return str(v) if not isinstance(v, Range) else f"({v})"


def format_cell(cell: Cell) -> str:
    """Candidates with rounded percentages; pair groups are separated by `` | ``."""
    if isinstance(cell, Uncertain):
        return " | ".join(", ".join(f"{_fmt_cand(c.value)} {round(c.prob * 100)}%" for c in cands)
                          for cands in cell.groups().values())
    return "NULL" if cell is None else str(cell)


# --------------------------------------------------------------------------
# Qualification semantics


def _infer_kind_mismatch(sample: Value, literal: Value) -> None:
    if sample is not None and literal is not None and _is_num(sample) != _is_num(literal):
        raise TypeMismatchError(f"literal {literal!r} is not comparable with value {sample!r}")


def candidate_qualifies(value: CandidateValue, op: str, literal: Value) -> bool:
    if literal is None:
        return False
    if isinstance(value, Range):
        if not _is_num(literal):
            raise TypeMismatchError(f"cannot compare range {value} with {literal!r}")
        rng = value.interval()
        return any(not rng.intersect(iv).empty() for iv in predicate_intervals(op, literal))
    return compare(value, op, literal)


def cell_qualifies(cell: Cell, op: str, literal: Value, kind: Kind | None = None) -> bool:
    """True iff at least one value of ``cell`` satisfies ``x op literal``."""
    op = canonical_op(op)
    check_compatible(literal, kind)
    if isinstance(cell, Uncertain):
        _infer_kind_mismatch(cell.original, literal)
        return any(candidate_qualifies(c.value, op, literal) for c in cell.candidates)
    _infer_kind_mismatch(cell, literal)
    return compare(cell, op, literal)


def _as_intervals(cell: Cell) -> list:
    """Candidate set of a cell: concrete values and ranges (nulls dropped)."""
    if isinstance(cell, Uncertain):
        vals = []
        seen = set()
        for c in cell.candidates:
            key = c.value
            if key in seen:
                continue
            seen.add(key)
            vals.append(c.value)
        return vals
    return [] if cell is None else [cell]


def _values_overlap(a: CandidateValue, b: CandidateValue) -> bool:
    ra, rb = isinstance(a, Range), isinstance(b, Range)
    if ra and rb:
        return not a.interval().intersect(b.interval()).empty()
    if ra:
        return a.contains(b)
    if rb:
        return b.contains(a)
    return compare(a, "=", b)


def _is_text(v: CandidateValue) -> bool:
    return not isinstance(v, Range) and not _is_num(v)


def keys_overlap(a: Cell, b: Cell) -> bool:
    """True iff the candidate value sets of two join-key cells intersect."""
    va, vb = _as_intervals(a), _as_intervals(b)
    if va and vb and _is_text(va[0]) != _is_text(vb[0]):
        raise TypeMismatchError(f"join keys {a!r} and {b!r} have incompatible kinds")
    return any(_values_overlap(x, y) for x in va for y in vb)


def most_probable(cell: Cell) -> Value:
    """Most probable concrete value in the first (by pair_id) group with one.

    Ties are broken by ascending value order.
    """
    if not isinstance(cell, Uncertain):
        return cell
    for pid, cands in sorted(cell.groups().items()):
        concrete = [c for c in cands if not isinstance(c.value, Range)]
        if concrete:
            best = min(concrete, key=lambda c: (-c.prob, value_key(c.value)))
            return best.value
    raise ValidationError("no concrete candidate")


def distribution(cell: Cell) -> list[tuple[Value, float]]:
    """Concrete (value, weight) pairs of the group used by :func:`most_probable`."""
    if not isinstance(cell, Uncertain):
        return [(cell, 1.0)]
    for pid, cands in sorted(cell.groups().items()):
        concrete = [c for c in cands if not isinstance(c.value, Range)]
        if concrete:
            total = math.fsum(c.prob for c in concrete)
            return [(c.value, c.prob / total) for c in concrete]
    return [(cell.original, 1.0)]


# --------------------------------------------------------------------------
# Relations


@dataclass(frozen=True)
class Schema:
    attrs: tuple
    kinds: tuple

    def __post_init__(self):
        if len(self.attrs) != len(self.kinds):
            raise SchemaError("schema attrs and kinds differ in length")
        if len(set(self.attrs)) != len(self.attrs):
            raise SchemaError(f"duplicate attribute names in {self.attrs}")

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, "Kind | str"]]) -> "Schema":
        attrs, kinds = [], []
        for a, k in pairs:
            attrs.append(a)
            kinds.append(k if isinstance(k, Kind) else Kind.parse(k))
        return cls(tuple(attrs), tuple(kinds))

    def index(self, attr: str) -> int:
        try:
            return self.attrs.index(attr)
        except ValueError:
            raise SchemaError(f"unknown attribute {attr!r}; schema is {list(self.attrs)}") from None

    def kind(self, attr: str) -> Kind:
        return self.kinds[self.index(attr)]

    def __len__(self) -> int:
        return len(self.attrs)


class Tuple(NamedTuple):
    tid: int
    cells: tuple


class _Column:
    """Derived columnar view of one attribute: originals plus a candidate log."""

    def __init__(self, rel: "Relation", a: int):
        kind = rel.schema.kinds[a]
        origs = [original_value(row[a]) for row in rel.cells]
        self.null = np.array([v is None for v in origs], dtype=bool)
        if kind.numeric:
            self.orig = np.array([np.nan if v is None else float(v) for v in origs], dtype=np.float64)
        else:
            self.orig = np.array(origs, dtype=object)
        uniq: dict = {}
        codes = np.empty(len(origs), dtype=np.int64)
        for i, v in enumerate(origs):
            if v is None:
                codes[i] = -1
            else:
                codes[i] = uniq.setdefault(v, len(uniq))
        self.codes = codes
        self.code_of = uniq
        self.uncertain = np.zeros(len(origs), dtype=bool)
        self.cand_rows: list[int] = []
        self.cand_vals: list = []
        self.range_rows: set[int] = set()
        self.cand_code_list: list[int] = []
        self._arr_cache = None
        self.kind = kind

    def log(self, row: int, old: Cell, new: Cell) -> None:
        if not isinstance(new, Uncertain):
            return
        self.uncertain[row] = True
        before = old.concrete_values() if isinstance(old, Uncertain) else set()
        for v in new.concrete_values() - before:
            self.cand_rows.append(row)
            self.cand_vals.append(v)
            self.cand_code_list.append(self.code_of.get(v, -2))
        if new.has_range():
            self.range_rows.add(row)
        self._arr_cache = None

    def cand_arrays(self):
        if self._arr_cache is None:
            rows = np.asarray(self.cand_rows, dtype=np.int64)
            if self.kind.numeric:
                vals = np.asarray(self.cand_vals, dtype=np.float64)
            else:
                vals = np.empty(len(self.cand_vals), dtype=object)
                vals[:] = self.cand_vals
            codes = np.asarray(self.cand_code_list, dtype=np.int64)
            self._arr_cache = (rows, vals, codes)
        return self._arr_cache[:2]

    def cand_codes(self):
        self.cand_arrays()
        return self._arr_cache[0], self._arr_cache[2]


def vcompare(arr: np.ndarray, op: str, lit: Value, kind: Kind) -> np.ndarray:
    """Vectorised :func:`compare` against a literal; nulls never qualify."""
    if lit is None:
        return np.zeros(len(arr), dtype=bool)
    check_compatible(lit, kind)
    if kind.numeric:
        with np.errstate(invalid="ignore"):
            eq = np.abs(arr - lit) <= EPS
            if op == "=":
                return eq
            notnull = ~np.isnan(arr)
            if op == "!=":
                return ~eq & notnull
            if op == "<":
                return (arr < lit) & ~eq
            if op == "<=":
                return (arr < lit) | eq
            if op == ">":
                return (arr > lit) & ~eq
            if op == ">=":
                return (arr > lit) | eq
        raise ValueError(op)
    out = np.zeros(len(arr), dtype=bool)
    notnull = np.array([v is not None for v in arr], dtype=bool)
    if notnull.any():
        sub = arr[notnull]
        if op == "=":
            r = sub == lit
        elif op == "!=":
            r = sub != lit
        elif op == "<":
            r = sub < lit
        elif op == "<=":
            r = sub <= lit
        elif op == ">":
            r = sub > lit
        elif op == ">=":
            r = sub >= lit
        else:
            raise ValueError(op)
        out[notnull] = np.asarray(r, dtype=bool)
    return out


class Relation:
    """A named bag of tuples with stable tids and per-rule checked state.

    ``checked`` maps a rule id to the set of tids already examined for that
    rule: for FDs, tuples whose lhs group was detected; for DCs, tuples whose
    pairs with every other tuple were examined.
    """

    def __init__(self, name: str, schema: Schema, tids: Sequence[int], rows: Sequence[Sequence[Cell]],
                 checked: dict | None = None):
        self.name = name
        self.schema = schema
        self.tids = list(tids)
        self.cells = [list(r) for r in rows]
        if len(self.tids) != len(self.cells):
            raise SchemaError("tids and rows differ in length")
        for r in self.cells:
            if len(r) != len(schema):
                raise SchemaError(f"row arity {len(r)} does not match schema arity {len(schema)}")
        self.row_of = {t: i for i, t in enumerate(self.tids)}
        if len(self.row_of) != len(self.tids):
            raise SchemaError(f"duplicate tids in relation {name}")
        self.checked: dict[str, set] = {k: set(v) for k, v in (checked or {}).items()}
        for rid, tids_ in self.checked.items():
            unknown = set(tids_) - self.row_of.keys()
            if unknown:
                raise SchemaError(f"checked state of {rid} references unknown tids {sorted(unknown)[:5]}")
        self._cols: dict[int, _Column] = {}
        self._keys: dict[tuple, tuple] = {}
        self._checked_masks: dict[str, np.ndarray] = {}
        self.version = 0

    # -- basic access -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.tids)

    def __repr__(self) -> str:
        return f"Relation({self.name!r}, {len(self)} tuples, attrs={list(self.schema.attrs)})"

    def attr(self, name: str) -> int:
        return self.schema.index(name)

    def tuple(self, row: int) -> Tuple:
        return Tuple(self.tids[row], tuple(self.cells[row]))

    def tuples(self):
        return [self.tuple(i) for i in range(len(self))]

    def get(self, tid: int, attr: str) -> Cell:
        return self.cells[self.row_of[tid]][self.attr(attr)]

    def original(self, row: int, a: int) -> Value:
        return original_value(self.cells[row][a])

    def set_cell(self, row: int, a: int, cell: Cell) -> None:
        old = self.cells[row][a]
        self.cells[row][a] = cell
        if original_value(old) != original_value(cell):
            # originals changed: derived columns and key codes are stale
            self._cols.pop(a, None)
            self._keys = {k: v for k, v in self._keys.items() if a not in k}
        else:
            col = self._cols.get(a)
            if col is not None:
                col.log(row, old, cell)
        self.version += 1

    def rows_of(self, tids: Iterable[int]) -> np.ndarray:
        return np.fromiter((self.row_of[t] for t in tids), dtype=np.int64)

    def tids_of(self, rows: Iterable[int]) -> list[int]:
        return [self.tids[int(r)] for r in rows]

    # -- checked state ------------------------------------------------------
    def checked_mask(self, rule_id: str) -> np.ndarray:
        """Boolean row mask of tuples checked for ``rule_id`` (do not mutate)."""
        mask = self._checked_masks.get(rule_id)
        if mask is None:
            mask = np.zeros(len(self), dtype=bool)
            s = self.checked.get(rule_id)
            if s:
                mask[self.rows_of(s)] = True
            self._checked_masks[rule_id] = mask
        return mask

    def mark_checked(self, rule_id: str, rows: Iterable[int]) -> None:
        rows = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
        mask = self.checked_mask(rule_id)
        fresh = rows[~mask[rows]]
        if len(fresh):
            fresh = np.unique(fresh)
            mask[fresh] = True
            self.checked.setdefault(rule_id, set()).update(self.tids_of(fresh))
        else:
            self.checked.setdefault(rule_id, set())

    # -- columnar views -----------------------------------------------------
    def column(self, a: int) -> _Column:
        col = self._cols.get(a)
        if col is None:
            col = _Column(self, a)
            for row, cells in enumerate(self.cells):
                c = cells[a]
                if isinstance(c, Uncertain):
                    col.log(row, None, c)
            self._cols[a] = col
        return col

    def key_codes(self, attrs: Sequence[int]) -> tuple[np.ndarray, dict]:
        """Composite code per row over original values of ``attrs`` (-1 if any null)."""
        attrs = tuple(attrs)
        hit = self._keys.get(attrs)
        if hit is not None:
            return hit
        if len(attrs) == 1:
            col = self.column(attrs[0])
            out = (col.codes, {(v,): c for v, c in col.code_of.items()})
        else:
            cols = [self.column(a).codes for a in attrs]
            stacked = np.stack(cols, axis=1)
            anynull = (stacked < 0).any(axis=1)
            lookup: dict = {}
            codes = np.empty(len(self), dtype=np.int64)
            for i in range(len(self)):
                if anynull[i]:
                    codes[i] = -1
                else:
                    key = tuple(self.original(i, a) for a in attrs)
                    codes[i] = lookup.setdefault(key, len(lookup))
            out = (codes, lookup)
        self._keys[attrs] = out
        return out

    def qualify_mask(self, a: int, op: str, literal: Value) -> np.ndarray:
        """Rows where at least one candidate of attribute ``a`` satisfies the comparison."""
        op = canonical_op(op)
        col = self.column(a)
        mask = vcompare(col.orig, op, literal, col.kind) & ~col.uncertain
        if col.cand_rows:
            rows, vals = col.cand_arrays()
            hit = vcompare(vals, op, literal, col.kind)
            mask[rows[hit]] = True
        for r in col.range_rows:
            if not mask[r] and cell_qualifies(self.cells[r][a], op, literal):
                mask[r] = True
        return mask

    # -- copying & comparison ---------------------------------------------
    def copy(self, name: str | None = None) -> "Relation":
        return Relation(name or self.name, self.schema, self.tids, [list(r) for r in self.cells],
                        {k: set(v) for k, v in self.checked.items()})

    def same_cells(self, other: "Relation") -> bool:
        return (self.schema == other.schema and self.tids == other.tids
                and all(a == b for a, b in zip(self.cells, other.cells)))

    def diff(self, other: "Relation", limit: int = 10) -> list[str]:
        out = []
        for i, (a, b) in enumerate(zip(self.cells, other.cells)):
            for j, (x, y) in enumerate(zip(a, b)):
                if x != y:
                    out.append(f"tid {self.tids[i]} {self.schema.attrs[j]}: {x!r} != {y!r}")
                    if len(out) >= limit:
                        return out
        return out

    @classmethod
    def from_rows(cls, name: str, schema: Schema, rows: Sequence[Sequence[Value]],
                  tids: Sequence[int] | None = None) -> "Relation":
        if tids is None:
            tids = range(1, len(rows) + 1)
        return cls(name, schema, tids, rows)
