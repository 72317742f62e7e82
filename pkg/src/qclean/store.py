"""Applying fixes in place and reading/writing relations.

Plain data is CSV with a header row plus a schema sidecar (``attr:kind`` per
line).  Probabilistic relations are stored as JSON lines: a header record,
one record per tuple and a trailer carrying the per-rule checked state.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ParseError, RepairError, SchemaError, ValidationError
from .model import Candidate, Kind, Range, Relation, Schema, Uncertain, Value, most_probable
from .repair import SIDES, FixSet, merge_fixes, split_pair_id


def apply_fixes(rel: Relation, fixes: FixSet) -> list[tuple]:
    """Write fix cells into ``rel``, merging with cells that are already uncertain.

    Returns the change log ``[(tid, attr, old, new)]``.  Tuples that received
    an FD fix are marked checked for the inducing rules; DC checked state is
    kept by the theta-join since it means "all pairs examined".
    """
    log = []
    marks: dict = {}
    for (tid, attr), cell in fixes:
        if tid not in rel.row_of:
            raise RepairError(f"fix targets unknown tid {tid} in {rel.name}")
        row, a = rel.row_of[tid], rel.attr(attr)
        old = rel.cells[row][a]
        new = merge_fixes(old, cell)
        if new != old:
            rel.set_cell(row, a, new)
            log.append((tid, attr, old, new))
        for c in cell.candidates:
            _, rules, side = split_pair_id(c.pair_id)
            if side in SIDES:
                for rid in rules:
                    marks.setdefault(rid, []).append(row)
    for rid, rows in marks.items():
        rel.mark_checked(rid, rows)
    return log


# ---------------------------------------------------------------------------
# CSV


def load_schema(path: str | Path) -> Schema:
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'attr:kind', got {line!r}", lineno, 1)
        attr, kind = (s.strip() for s in line.split(":", 1))
        try:
            pairs.append((attr, Kind.parse(kind)))
        except SchemaError as exc:
            raise ParseError(str(exc), lineno, line.index(":") + 2) from None
    if not pairs:
        raise SchemaError(f"schema file {path} declares no attributes")
    return Schema.of(pairs)


def parse_scalar(text: str, kind: Kind) -> Value:
    if text == "":
        return None
    if kind is Kind.INT:
        return int(text)
    if kind is Kind.FLOAT:
        return float(text)
    return text


def load_csv(path: str | Path, schema: Schema, name: str | None = None) -> Relation:
    """Read a headed CSV file; tids are assigned 1..n in row order; empty fields are null."""
    path = Path(path)
    name = name or path.stem
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path} is empty", 1, 1) from None
        if sorted(header) != sorted(schema.attrs):
            raise SchemaError(f"CSV header {header} does not match schema {list(schema.attrs)}")
        order = [header.index(a) for a in schema.attrs]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno, 1)
            row = []
            for a, k, j in zip(schema.attrs, schema.kinds, order):
                try:
                    row.append(parse_scalar(rec[j].strip() if k.numeric else rec[j], k))
                except ValueError:
                    raise ParseError(f"bad {k.value} value {rec[j]!r} for {a}", lineno, j + 1) from None
            rows.append(row)
    return Relation.from_rows(name, schema, rows)


def save_csv(path: str | Path, rel: Relation, most_likely: bool = True) -> None:
    """Write a plain CSV; uncertain cells become their most probable value (or original)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rel.schema.attrs)
        for row in rel.cells:
            out = []
            for c in row:
                if isinstance(c, Uncertain):
                    c = most_probable(c) if most_likely else c.original
                out.append("" if c is None else c)
            w.writerow(out)


def save_schema(path: str | Path, schema: Schema) -> None:
    Path(path).write_text("".join(f"{a}:{k.value}\n" for a, k in zip(schema.attrs, schema.kinds)))


# ---------------------------------------------------------------------------
# probabilistic JSON lines


def _enc_value(v) -> dict:
    if isinstance(v, Range):
        return {"range": [v.op, v.bound]}
    return {"v": v}


def _enc_cell(c):
    if not isinstance(c, Uncertain):
        return c
    cands = []
    for cand in c.candidates:
        d = _enc_value(cand.value)
        d.update(p=cand.prob, g=cand.pair_id, prov=sorted(cand.provenance))
        cands.append(d)
    return {"orig": c.original, "cands": cands}


def _dec_cell(obj, lineno: int):
    if not isinstance(obj, dict):
        return obj
    try:
        cands = []
        for d in obj["cands"]:
            value = Range(d["range"][0], d["range"][1]) if "range" in d else d["v"]
            cands.append(Candidate(value, d["p"], d["g"], frozenset(d["prov"])))
        cell = Uncertain(obj["orig"], tuple(cands))
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed uncertain cell ({exc})", lineno) from None
    try:
        cell.validate()
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None
    return cell


def dump_prob(rel: Relation) -> str:
    lines = [json.dumps({"relation": rel.name,
                         "schema": [[a, k.value] for a, k in zip(rel.schema.attrs, rel.schema.kinds)]})]
    for tid, row in zip(rel.tids, rel.cells):
        lines.append(json.dumps({"tid": tid, "cells": [_enc_cell(c) for c in row]}))
    lines.append(json.dumps({"checked": {k: sorted(v) for k, v in sorted(rel.checked.items())}}))
    return "\n".join(lines) + "\n"


def save_prob(path: str | Path, rel: Relation) -> None:
    Path(path).write_text(dump_prob(rel))


def parse_prob(text: str) -> Relation:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ParseError("probabilistic file needs a header and a trailer", 1)
    try:
        recs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    head, tail = recs[0], recs[-1]
    if "relation" not in head or "schema" not in head:
        raise ParseError("first record must carry 'relation' and 'schema'", 1)
    if "checked" not in tail:
        raise ParseError("last record must carry 'checked'", len(lines))
    schema = Schema.of((a, k) for a, k in head["schema"])
    tids, rows = [], []
    for lineno, rec in enumerate(recs[1:-1], start=2):
        if "tid" not in rec or "cells" not in rec:
            raise ParseError("tuple record needs 'tid' and 'cells'", lineno)
        if len(rec["cells"]) != len(schema):
            raise ParseError(f"row arity {len(rec['cells'])} does not match schema arity {len(schema)}", lineno)
        tids.append(rec["tid"])
        rows.append([_dec_cell(c, lineno) for c in rec["cells"]])
    return Relation(head["relation"], schema, tids, rows, tail["checked"])


def load_prob(path: str | Path) -> Relation:
    return parse_prob(Path(path).read_text())


__all__ = ["apply_fixes", "load_schema", "load_csv", "save_csv", "save_schema", "parse_scalar",
           "dump_prob", "save_prob", "parse_prob", "load_prob"]
