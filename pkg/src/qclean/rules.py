"""Rule DSL: functional dependencies and two-tuple denial constraints.

Grammar (one rule per line, ``#`` starts a comment)::

    [id =] FD <rel>: a[, b]* -> c[, d]*
    [id =] DC <rel>: !(atom [& atom]*)
    atom := t1.attr op t2.attr | t<k>.attr op literal

Rule ids default to ``fd1, fd2, ...`` / ``dc1, ...`` in file order.  An FD
with several rhs attributes is split into one FD per rhs attribute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import ParseError, RuleError
from .model import ORDER_OPS, Kind, Relation, Value, canonical_op

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*$")


@dataclass(frozen=True)
class AttrRef:
    tuple_index: int
    attr: str

    def __str__(self) -> str:
        return f"t{self.tuple_index}.{self.attr}"


@dataclass(frozen=True)
class Predicate:
    left: AttrRef
    op: str
    right: Union[AttrRef, Value]

    @property
    def is_pair(self) -> bool:
        return isinstance(self.right, AttrRef)

    @property
    def attrs(self) -> set:
        out = {self.left.attr}
        if self.is_pair:
            out.add(self.right.attr)
        return out

    def __str__(self) -> str:
        r = self.right if self.is_pair else repr(self.right)
        return f"{self.left} {self.op} {r}"


@dataclass(frozen=True)
class FD:
    lhs: tuple
    rhs: str

    @property
    def attrs(self) -> set:
        return set(self.lhs) | {self.rhs}


@dataclass(frozen=True)
class DC:
    atoms: tuple

    @property
    def attrs(self) -> set:
        out: set = set()
        for a in self.atoms:
            out |= a.attrs
        return out

    def order_atoms(self) -> list[int]:
        """Indices of atoms comparing one attribute across both tuples with <,<=,>,>=."""
        return [i for i, a in enumerate(self.atoms) if a.is_pair and a.op in ORDER_OPS]


@dataclass(frozen=True)
class Rule:
    id: str
    relation: str
    body: Union[FD, DC]

    @property
    def is_fd(self) -> bool:
        return isinstance(self.body, FD)

    @property
    def attrs(self) -> set:
        return self.body.attrs

    def __str__(self) -> str:
        if self.is_fd:
            return f"{self.id} = FD {self.relation}: {', '.join(self.body.lhs)} -> {self.body.rhs}"
        atoms = " & ".join(str(a) for a in self.body.atoms)
        return f"{self.id} = DC {self.relation}: !({atoms})"


# ---------------------------------------------------------------------------
# parsing

_HEAD_RE = re.compile(r"\s*(?:(?P<id>[^\s=]+)\s*=\s*)?(?P<kind>FD|DC)\s+(?P<rel>[A-Za-z_][\w]*)\s*:\s*(?P<body>.*)$",
                      re.IGNORECASE)
_ATOM_RE = re.compile(
    r"\s*t(?P<li>\d+)\.(?P<la>[A-Za-z_]\w*)\s*(?P<op><=|>=|!=|<>|==|≠|≤|≥|=|<|>)\s*"
    r"(?:t(?P<ri>\d+)\.(?P<ra>[A-Za-z_]\w*)|(?P<lit>'(?:[^']|'')*'|-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|-?\.\d+))\s*$")


def _literal(text: str) -> Value:
    if text.startswith("'"):
        return text[1:-1].replace("''", "'")
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


def _attr_list(text: str, line: int, col: int) -> list[str]:
    names = [t.strip() for t in text.split(",")]
    if not names or any(not re.fullmatch(r"[A-Za-z_]\w*", n) for n in names):
        raise ParseError(f"expected comma-separated attribute names, got {text.strip()!r}", line, col)
    return names


def _parse_fd(body: str, line: int, col: int) -> tuple[list[str], list[str]]:
    if "->" not in body:
        raise ParseError("FD needs '->'", line, col)
    left, _, right = body.partition("->")
    lhs = _attr_list(left, line, col)
    rcol = col + len(left) + 2
    if not right.strip():
        raise ParseError("FD has empty right-hand side", line, rcol)
    rhs = _attr_list(right, line, rcol)
    overlap = set(lhs) & set(rhs)
    if overlap:
        raise ParseError(f"FD rhs attribute(s) {sorted(overlap)} also appear in lhs", line, rcol)
    return lhs, rhs


def _parse_dc(body: str, line: int, col: int) -> list[Predicate]:
    text = body.strip()
    lead = len(body) - len(body.lstrip())
    if text.startswith("¬"):
        text = "!" + text[1:]
    if not (text.startswith("!") and text[1:].lstrip().startswith("(") and text.endswith(")")):
        raise ParseError("DC body must look like !(atom & atom ...)", line, col + lead)
    inner = text[1:].lstrip()[1:-1]
    atoms = []
    offset = col + lead + text.index("(") + 1
    for part in re.split(r"&|∧", inner):
        m = _ATOM_RE.match(part)
        if not m:
            raise ParseError(f"malformed DC atom {part.strip()!r}", line, offset)
        li = int(m["li"])
        ri = int(m["ri"]) if m["ri"] else None
        for k in (li, ri):
            if k is not None and k not in (1, 2):
                raise ParseError(f"DCs over more than two tuples are not supported (t{k})", line, offset)
        op = canonical_op(m["op"])
        if ri is not None:
            if m["la"] != m["ra"] and op in ORDER_OPS:
                raise ParseError("inequality atoms must compare the same attribute of both tuples", line, offset)
            if li == ri:
                raise ParseError("pair atoms must relate t1 and t2", line, offset)
            left, right = AttrRef(li, m["la"]), AttrRef(ri, m["ra"])
            if li == 2:
                left, right, op = right, left, _flip(op)
            atoms.append(Predicate(left, op, right))
        else:
            atoms.append(Predicate(AttrRef(li, m["la"]), op, _literal(m["lit"])))
        offset += len(part) + 1
    if not any(a.is_pair for a in atoms):
        raise ParseError("DC must relate the two tuples in at least one atom", line, col)
    return atoms


def _flip(op: str) -> str:
    return {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(op, op)


def parse_rules(text: str) -> list[Rule]:
    """Parse rule DSL source into normalised rules, in file order."""
    rules: list[Rule] = []
    counters = {"FD": 0, "DC": 0}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = _HEAD_RE.match(line)
        if not m:
            raise ParseError("expected 'FD <rel>: ...' or 'DC <rel>: ...'", lineno, 1)
        kind = m["kind"].upper()
        counters[kind] += 1
        rid = m["id"] or f"{kind.lower()}{counters[kind]}"
        if not _ID_RE.match(rid) or "+" in rid or ":" in rid:
            raise ParseError(f"invalid rule id {rid!r}", lineno, 1)
        col = m.start("body") + 1
        if kind == "FD":
            lhs, rhs = _parse_fd(m["body"], lineno, col)
            new = normalize_fd(Rule(rid, m["rel"], FD(tuple(lhs), tuple(rhs))))
        else:
            new = [Rule(rid, m["rel"], DC(tuple(_parse_dc(m["body"], lineno, col))))]
        for r in new:
            if r.id in seen:
                raise ParseError(f"duplicate rule id {r.id!r}", lineno, 1)
            seen.add(r.id)
        rules.extend(new)
    return rules


def normalize_fd(rule: Rule) -> list[Rule]:
    """Split an FD with a multi-attribute rhs into single-rhs FDs."""
    body = rule.body
    rhs = body.rhs
    if isinstance(rhs, str):
        return [rule]
    rhs = list(rhs)
    if len(rhs) == 1:
        return [Rule(rule.id, rule.relation, FD(tuple(body.lhs), rhs[0]))]
    return [Rule(f"{rule.id}.{r}", rule.relation, FD(tuple(body.lhs), r)) for r in rhs]


def rule_overlaps_query(rule: Rule, projection: Iterable[str], where: Iterable[str]) -> bool:
    """A rule affects a query iff its attributes intersect the projected or filtered ones."""
    return bool(rule.attrs & (set(projection) | set(where)))


def dc_as_fd(rule: Rule) -> Rule:
    """Rewrite ``!(t1.X = t2.X & ... & t1.Y != t2.Y)`` as the FD ``X -> Y``.

    Other rules are returned unchanged.
    """
    if rule.is_fd:
        return rule
    atoms = rule.body.atoms
    if not all(a.is_pair and a.left.attr == a.right.attr for a in atoms):
        return rule
    eq = [a.left.attr for a in atoms if a.op == "="]
    ne = [a.left.attr for a in atoms if a.op == "!="]
    if len(ne) == 1 and eq and len(eq) + 1 == len(atoms) and ne[0] not in eq:
        return Rule(rule.id, rule.relation, FD(tuple(eq), ne[0]))
    return rule


def bind_rules(rules: Iterable[Rule], relations: dict[str, Relation]) -> list[Rule]:
    """Check rules against relation schemas; DCs that encode FDs become FDs."""
    out = []
    for r in rules:
        if r.relation not in relations:
            raise RuleError(f"rule {r.id} references unknown relation {r.relation!r}")
        schema = relations[r.relation].schema
        for a in r.attrs:
            if a not in schema.attrs:
                raise RuleError(f"rule {r.id}: unknown attribute {a!r} in relation {r.relation}")
        r = dc_as_fd(r)
        if not r.is_fd:
            order = r.body.order_atoms()
            if not order:
                raise RuleError(f"rule {r.id}: DC needs an inequality atom relating both tuples")
            for a in r.body.atoms:
                if a.op in ORDER_OPS and not schema.kind(a.left.attr).numeric:
                    raise RuleError(f"rule {r.id}: inequality over non-numeric attribute {a.left.attr}")
                if not a.is_pair and a.right is not None:
                    kind = schema.kind(a.left.attr)
                    if kind.numeric != isinstance(a.right, (int, float)):
                        raise RuleError(f"rule {r.id}: literal {a.right!r} incompatible with {a.left.attr}")
        out.append(r)
    return out


def ordering_attr(rule: Rule) -> str:
    body = rule.body
    return body.atoms[body.order_atoms()[0]].left.attr


__all__ = ["AttrRef", "Predicate", "FD", "DC", "Rule", "parse_rules", "normalize_fd",
           "rule_overlaps_query", "dc_as_fd", "bind_rules", "ordering_attr", "Kind"]
