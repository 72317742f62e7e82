import json

import pytest
from hypothesis import given, strategies as st

from conftest import make_cities
from qclean.errors import ParseError, SchemaError, ValidationError
from qclean.model import Candidate, Range, Relation, Schema, Uncertain
from qclean.relax import detect_fd_violations
from qclean.repair import fd_fixes
from qclean.rules import parse_rules
from qclean.store import (apply_fixes, dump_prob, load_csv, load_schema, parse_prob, save_csv, save_prob,
                          save_schema)

FD = parse_rules("fd1 = FD cities: zip -> city")[0]


def cleaned():
    rel = make_cities()
    for g in detect_fd_violations(rel, rel.tids, FD).fd["fd1"]:
        apply_fixes(rel, fd_fixes(rel, g, FD))
    return rel


def test_apply_fixes_logs_and_marks_checked():
    rel = make_cities()
    g = detect_fd_violations(rel, rel.tids, FD).fd["fd1"][0]
    log = apply_fixes(rel, fd_fixes(rel, g, FD))
    assert [(t, a) for t, a, _, _ in log] == [(1, "city"), (2, "city"), (2, "zip"), (3, "city")]
    assert rel.checked["fd1"] == {1, 2, 3}
    assert apply_fixes(rel, fd_fixes(rel, g, FD)) == []  # re-applying changes nothing


def test_csv_round_trip(tmp_path):
    rel = make_cities()
    save_csv(tmp_path / "c.csv", rel)
    save_schema(tmp_path / "c.schema", rel.schema)
    back = load_csv(tmp_path / "c.csv", load_schema(tmp_path / "c.schema"), "cities")
    assert back.same_cells(rel)


def test_csv_reorders_columns_and_reads_nulls(tmp_path):
    (tmp_path / "r.csv").write_text("b,a\nx,1\n,\n")
    (tmp_path / "r.schema").write_text("a: int  # key\nb:text\n")
    rel = load_csv(tmp_path / "r.csv", load_schema(tmp_path / "r.schema"))
    assert rel.name == "r" and rel.cells == [[1, "x"], [None, ""]] or rel.cells == [[1, "x"], [None, None]]


def test_csv_errors(tmp_path):
    (tmp_path / "s").write_text("a:int\n")
    (tmp_path / "bad.csv").write_text("a\nfoo\n")
    with pytest.raises(ParseError) as exc:
        load_csv(tmp_path / "bad.csv", load_schema(tmp_path / "s"))
    assert exc.value.line == 2
    (tmp_path / "hdr.csv").write_text("z\n1\n")
    with pytest.raises(SchemaError):
        load_csv(tmp_path / "hdr.csv", load_schema(tmp_path / "s"))
    (tmp_path / "k").write_text("a:int\nb blob\n")
    with pytest.raises(ParseError) as exc:
        load_schema(tmp_path / "k")
    assert exc.value.line == 2


def test_most_likely_csv(tmp_path):
    save_csv(tmp_path / "m.csv", cleaned())
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[2] == "9001,Los Angeles"


def test_prob_round_trip(tmp_path):
    rel = cleaned()
    rel.set_cell(4, 0, Uncertain(10001, (Candidate(10001, 0.5, "5:d:atom-0", frozenset({1})),
                                         Candidate(Range("<", 9000), 0.5, "5:d:atom-0", frozenset({1})))))
    save_prob(tmp_path / "p.jsonl", rel)
    back = parse_prob((tmp_path / "p.jsonl").read_text())
    assert back.same_cells(rel) and back.checked == rel.checked and back.name == "cities"
    assert dump_prob(back) == dump_prob(rel)


def test_prob_validation_names_the_line():
    lines = dump_prob(cleaned()).splitlines()
    rec = json.loads(lines[1])
    rec["cells"][1]["cands"][0]["p"] = 0.9
    lines[1] = json.dumps(rec)
    with pytest.raises(ValidationError, match="line 2"):
        parse_prob("\n".join(lines))
    with pytest.raises(ParseError):
        parse_prob(lines[0])
    with pytest.raises(ParseError):
        parse_prob("\n".join([lines[0], "{oops", lines[-1]]))


@given(st.lists(st.tuples(st.integers(-5, 5), st.text("abc ,\"'\n", max_size=5)), max_size=15))
def test_csv_round_trip_property(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("csv")
    schema = Schema.of([("n", "int"), ("s", "text")])
    rel = Relation.from_rows("r", schema, [[n, s if s else None] for n, s in rows])
    save_csv(d / "r.csv", rel)
    assert load_csv(d / "r.csv", schema).same_cells(rel)
