import os
import sys
from pathlib import Path

import hypothesis
import pytest

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from qclean.model import Relation, Schema  # noqa: E402
from qclean.rules import parse_rules  # noqa: E402

CITY_SCHEMA = Schema.of([("zip", "int"), ("city", "text")])
EMP_SCHEMA = Schema.of([("zip", "int"), ("name", "text"), ("phone", "int")])


def make_cities() -> Relation:
    return Relation.from_rows("cities", CITY_SCHEMA, [
        [9001, "Los Angeles"], [9001, "San Francisco"], [9001, "Los Angeles"],
        [10001, "San Francisco"], [10001, "New York"]])


def make_join_inputs() -> dict:
    cities = Relation.from_rows("cities", CITY_SCHEMA, [
        [9001, "Los Angeles"], [9001, "San Francisco"], [10001, "San Francisco"]])
    emp = Relation.from_rows("employee", EMP_SCHEMA, [
        [9001, "Peter", 23456], [10001, "Mary", 12345], [10002, "Jon", 12345]])
    return {"cities": cities, "employee": emp}


@pytest.fixture
def cities():
    return make_cities()


@pytest.fixture
def zip_city():
    return parse_rules("fd1 = FD cities: zip -> city")


@pytest.fixture
def join_inputs():
    return make_join_inputs()


@pytest.fixture
def join_rules():
    return parse_rules("fd1 = FD cities: zip -> city\nfd2 = FD employee: phone -> zip")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
