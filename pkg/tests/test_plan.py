import pytest

from conftest import CITY_SCHEMA, EMP_SCHEMA
from qclean.errors import QCleanError, SchemaError
from qclean.plan import CleanSelect, cleaning_ops, explain, plan, walk
from qclean.rules import parse_rules
from qclean.sql import parse_query

CATALOG = {"cities": CITY_SCHEMA, "employee": EMP_SCHEMA}
RULES = parse_rules("fd1 = FD cities: zip -> city\nfd2 = FD employee: phone -> zip")


def shape(node):
    return [type(n).__name__ for n in walk(node)]


def test_sp_plan():
    p = plan(parse_query("SELECT zip FROM cities WHERE city = 'Los Angeles'"), RULES, CATALOG)
    assert shape(p) == ["Project", "CleanSelect", "Select", "Scan"]
    assert cleaning_ops(p)[0].rules == ("fd1",)


def test_unrelated_query_has_no_cleaning():
    p = plan(parse_query("SELECT name FROM employee WHERE name = 'Jon'"), RULES, CATALOG)
    assert cleaning_ops(p) == []


def test_spj_plan_cleans_filter_side_and_join():
    q = parse_query("SELECT c.zip, e.name FROM cities c, employee e WHERE c.zip = e.zip AND c.city = 'Los Angeles'")
    p = plan(q, RULES, CATALOG)
    assert shape(p) == ["Project", "CleanJoin", "EquiJoin", "CleanSelect", "Select", "Scan", "Scan"]
    cj = p.child
    assert (cj.rules_left, cj.rules_right) == (("fd1",), ("fd2",))


def test_group_by_cleaning_sits_below_aggregation():
    p = plan(parse_query("SELECT city, COUNT(*) FROM cities WHERE zip > 1 GROUP BY city"), RULES, CATALOG)
    assert shape(p) == ["Project", "GroupBy", "CleanSelect", "Select", "Scan"]


def test_full_decision_and_offline_mode():
    q = parse_query("SELECT zip FROM cities WHERE city = 'Los Angeles'")
    p = plan(q, RULES, CATALOG, decisions={"cities": "full"})
    assert shape(p) == ["Project", "Select", "CleanFull", "Scan"]
    q2 = parse_query("SELECT c.zip, e.name FROM cities c, employee e WHERE c.zip = e.zip")
    p2 = plan(q2, RULES, CATALOG, mode="offline")
    assert [type(n).__name__ for n in cleaning_ops(p2)] == ["CleanFull", "CleanFull"]
    assert "CleanFull[fd1](cities)" in explain(p2)


def test_binding_errors():
    with pytest.raises(SchemaError):
        plan(parse_query("SELECT zip FROM nowhere"), RULES, CATALOG)
    with pytest.raises(SchemaError):
        plan(parse_query("SELECT zip FROM cities c, employee e WHERE c.zip = e.zip"), RULES, CATALOG)
    with pytest.raises(SchemaError):
        plan(parse_query("SELECT x.zip FROM cities"), RULES, CATALOG)
    with pytest.raises(QCleanError):
        plan(parse_query("SELECT c.zip FROM cities c, employee e WHERE c.zip = e.zip AND (c.city = 'a' OR e.name = 'b')"),
             RULES, CATALOG)


def test_star_expands_in_schema_order():
    p = plan(parse_query("SELECT * FROM cities"), RULES, CATALOG)
    assert p.labels == ("zip", "city")
    assert isinstance(p.child, CleanSelect)
