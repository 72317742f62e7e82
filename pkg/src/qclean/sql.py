"""Parser for the flat SQL subset the engine accepts.

    SELECT item [, item]* FROM rel [alias] [, rel [alias]]
        [WHERE cond] [GROUP BY col [, col]*]
    item := * | col | AGG(col) | COUNT(*)       AGG in COUNT SUM AVG MIN MAX
    cond := conjunctions/disjunctions of `col op literal`, parentheses allowed,
            plus exactly one top-level `col = col` when two relations are listed

Keywords are case-insensitive; strings are single-quoted with '' escaping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ParseError
from .model import Value, canonical_op

AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
_KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "OR", "GROUP", "BY", "AS", *AGGREGATES}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<str>'(?:[^']|'')*')
  | (?P<num>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<op><=|>=|!=|<>|==|≠|≤|≥|=|<|>)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.*;])
""", re.VERBOSE)


@dataclass(frozen=True)
class ColRef:
    table: Optional[str]
    attr: str

    def __str__(self) -> str:
        return f"{self.table}.{self.attr}" if self.table else self.attr


@dataclass(frozen=True)
class Comparison:
    col: ColRef
    op: str
    value: Value


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    items: tuple


@dataclass(frozen=True)
class JoinPred:
    left: ColRef
    right: ColRef


@dataclass(frozen=True)
class SelectItem:
    col: Optional[ColRef]  # None for COUNT(*) or bare *
    agg: Optional[str] = None

    def __str__(self) -> str:
        inner = "*" if self.col is None else str(self.col)
        return f"{self.agg}({inner})" if self.agg else inner


Expr = Union[Comparison, BoolOp]


@dataclass(frozen=True)
class QueryAst:
    select: tuple
    tables: tuple  # ((relation, alias), ...)
    where: Optional[Expr] = None
    join: Optional[JoinPred] = None
    group_by: tuple = ()
    text: str = ""

    @property
    def is_aggregate(self) -> bool:
        return any(i.agg for i in self.select)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out, i = [], 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", 1, i + 1)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            if kind == "name" and m.group().upper() in _KEYWORDS:
                kind = "kw"
            out.append(_Tok(kind, m.group(), i))
        i = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    # -- helpers
    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, 1, tok.pos + 1)

    def accept_kw(self, word: str) -> bool:
        t = self.peek()
        if t.kind == "kw" and t.text.upper() == word:
            self.i += 1
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.accept_kw(word):
            raise self.error(f"expected {word}, found {self.peek().text or 'end of input'!r}")

    def accept(self, text: str) -> bool:
        if self.peek().kind == "punct" and self.peek().text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {self.peek().text or 'end of input'!r}")

    def name(self) -> str:
        t = self.peek()
        if t.kind != "name":
            if t.kind == "kw" and t.text.upper() == "SELECT":
                raise self.error("nested queries are not supported")
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    # -- grammar
    def colref(self) -> ColRef:
        first = self.name()
        if self.accept("."):
            return ColRef(first, self.name())
        return ColRef(None, first)

    def item(self) -> SelectItem:
        t = self.peek()
        if self.accept("*"):
            return SelectItem(None)
        if t.kind == "kw" and t.text.upper() in AGGREGATES:
            self.i += 1
            agg = t.text.upper()
            self.expect("(")
            if self.accept("*"):
                if agg != "COUNT":
                    raise self.error(f"{agg}(*) is not allowed", t)
                col = None
            else:
                col = self.colref()
            self.expect(")")
            return SelectItem(col, agg)
        return SelectItem(self.colref())

    def literal(self) -> Value:
        t = self.peek()
        if t.kind == "str":
            self.i += 1
            return t.text[1:-1].replace("''", "'")
        if t.kind == "num":
            self.i += 1
            return int(t.text) if re.fullmatch(r"-?\d+", t.text) else float(t.text)
        if t.kind == "punct" and t.text == "(" and self.peek(1).kind == "kw" and self.peek(1).text.upper() == "SELECT":
            raise self.error("nested queries are not supported")
        raise self.error(f"expected a literal, found {t.text or 'end of input'!r}")

    def atom(self):
        if self.accept("("):
            if self.peek().kind == "kw" and self.peek().text.upper() == "SELECT":
                raise self.error("nested queries are not supported")
            e = self.disjunction()
            self.expect(")")
            return e
        col = self.colref()
        t = self.peek()
        if t.kind != "op":
            raise self.error(f"expected a comparison operator, found {t.text or 'end of input'!r}")
        self.i += 1
        op = canonical_op(t.text)
        if self.peek().kind == "name":
            right = self.colref()
            if op != "=":
                raise self.error("only equi-joins are supported", t)
            return JoinPred(col, right)
        return Comparison(col, op, self.literal())

    def conjunction(self):
        items = [self.atom()]
        while self.accept_kw("AND"):
            items.append(self.atom())
        return items[0] if len(items) == 1 else BoolOp("and", tuple(items))

    def disjunction(self):
        items = [self.conjunction()]
        while self.accept_kw("OR"):
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else BoolOp("or", tuple(items))

    def query(self) -> QueryAst:
        self.expect_kw("SELECT")
        items = [self.item()]
        while self.accept(","):
            items.append(self.item())
        self.expect_kw("FROM")
        tables = [self.table()]
        while self.accept(","):
            tables.append(self.table())
        if len(tables) > 2:
            raise self.error("at most two relations are supported")
        where = join = None
        if self.accept_kw("WHERE"):
            where, join = _split_join(self.disjunction(), self)
        group = []
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group.append(self.colref())
            while self.accept(","):
                group.append(self.colref())
        self.accept(";")
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")
        if len(tables) == 2 and join is None:
            raise ParseError("a two-relation query needs one equi-join predicate", 1, 1)
        if len(tables) == 1 and join is not None:
            raise ParseError("join predicate over a single relation", 1, 1)
        aliases = [a for _, a in tables]
        if len(set(aliases)) != len(aliases):
            raise ParseError(f"duplicate relation alias in {aliases}", 1, 1)
        has_agg = any(i.agg for i in items)
        if group and not has_agg:
            raise ParseError("GROUP BY needs an aggregate in the select list", 1, 1)
        if has_agg:
            plain = [i for i in items if not i.agg]
            if any(i.col is None for i in plain) or any(i.col not in group for i in plain):
                raise ParseError("non-aggregated select items must appear in GROUP BY", 1, 1)
        return QueryAst(tuple(items), tuple(tables), where, join, tuple(group), self.text.strip())

    def table(self) -> tuple[str, str]:
        t = self.peek()
        if t.kind == "punct" and t.text == "(":
            raise self.error("nested queries are not supported")
        rel = self.name()
        self.accept_kw("AS")
        alias = rel
        if self.peek().kind == "name":
            alias = self.name()
        return rel, alias


def _split_join(expr, parser: _Parser):
    """Pull the single top-level join predicate out of the WHERE clause."""
    if isinstance(expr, JoinPred):
        return None, expr
    if isinstance(expr, BoolOp):
        joins = [e for e in expr.items if isinstance(e, JoinPred)]
        if expr.op == "or" and joins:
            raise ParseError("join predicates cannot appear under OR", 1, 1)
        if len(joins) > 1:
            raise ParseError("only one join predicate is supported", 1, 1)
        _reject_nested_joins(expr)
        rest = tuple(e for e in expr.items if not isinstance(e, JoinPred))
        where = None if not rest else rest[0] if len(rest) == 1 else BoolOp(expr.op, rest)
        return where, joins[0] if joins else None
    return expr, None


def _reject_nested_joins(expr) -> None:
    for e in expr.items:
        if isinstance(e, BoolOp):
            if any(isinstance(x, JoinPred) for x in e.items):
                raise ParseError("join predicates must be top-level conjuncts", 1, 1)
            _reject_nested_joins(e)


def parse_query(text: str) -> QueryAst:
    return _Parser(text).query()


def split_queries(text: str) -> list[str]:
    """One query per non-empty line; lines starting with ``--`` are comments."""
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("--"):
            out.append(line)
    return out


def expr_columns(expr) -> list[ColRef]:
    if expr is None:
        return []
    if isinstance(expr, Comparison):
        return [expr.col]
    out = []
    for e in expr.items:
        out.extend(expr_columns(e))
    return out


__all__ = ["ColRef", "Comparison", "BoolOp", "JoinPred", "SelectItem", "QueryAst", "AGGREGATES",
           "parse_query", "split_queries", "expr_columns"]
