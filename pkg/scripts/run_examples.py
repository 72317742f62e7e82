"""Print the worked cities and employee examples through the engine."""

from qclean import EngineConfig, Relation, Schema, Session, parse_rules
from qclean.plan import explain
from qclean.sql import parse_query

CITY = Schema.of([("zip", "int"), ("city", "text")])
EMP = Schema.of([("zip", "int"), ("name", "text"), ("phone", "int")])


def show(session, query):
    print(f"> {query}")
    print(explain(session.plan(parse_query(query))))
    result, rec = session.execute(query)
    print(result.format())
    print(f"-- violations {rec.violations}, fixes {rec.fixes}, strategy {rec.strategy}\n")


def main():
    cities = Relation.from_rows("cities", CITY, [
        [9001, "Los Angeles"], [9001, "San Francisco"], [9001, "Los Angeles"],
        [10001, "San Francisco"], [10001, "New York"]])
    s = Session({"cities": cities}, parse_rules("fd1 = FD cities: zip -> city"), EngineConfig(mode="incremental"))
    show(s, "SELECT zip FROM cities WHERE city = 'Los Angeles'")
    show(s, "SELECT * FROM cities WHERE zip = 9001")

    rels = {
        "cities": Relation.from_rows("cities", CITY, [
            [9001, "Los Angeles"], [9001, "San Francisco"], [10001, "San Francisco"]]),
        "employee": Relation.from_rows("employee", EMP, [
            [9001, "Peter", 23456], [10001, "Mary", 12345], [10002, "Jon", 12345]]),
    }
    rules = parse_rules("fd1 = FD cities: zip -> city\nfd2 = FD employee: phone -> zip")
    s = Session(rels, rules, EngineConfig(mode="incremental"))
    show(s, "SELECT c.zip, e.zip, e.name FROM cities c, employee e WHERE c.zip = e.zip AND c.city = 'Los Angeles'")


if __name__ == "__main__":
    main()
