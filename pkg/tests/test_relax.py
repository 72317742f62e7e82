import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import make_cities
from qclean.errors import StatisticsError
from qclean.model import Relation, Schema
from qclean.relax import (detect_fd_violations, extra_iteration_probability, lhs_group_rows, relax_fd,
                          relaxed_size_upper_bound, value_frequencies)
from qclean.repair import fd_fixes
from qclean.rules import parse_rules
from qclean.store import apply_fixes

FD = parse_rules("fd1 = FD cities: zip -> city")[0]


def test_rhs_filter_needs_one_iteration():
    rel = make_cities()
    res = relax_fd(rel, [1, 3], FD)  # city = 'Los Angeles'
    assert res.extra == {2} and res.iterations == 1
    assert res.steps == ((frozenset({2}), frozenset()),)


def test_lhs_filter_walks_the_cluster():
    rel = make_cities()
    res = relax_fd(rel, [1, 2, 3], FD)  # zip = 9001
    assert res.extra == {4, 5}
    assert res.steps[0] == (frozenset(), frozenset({4}))
    assert res.steps[1] == (frozenset({5}), frozenset())
    assert res.iterations == 2


def test_candidates_take_part_in_matching():
    rel = make_cities()
    for g in detect_fd_violations(rel, [1, 2, 3], FD).fd["fd1"]:
        apply_fixes(rel, fd_fixes(rel, g, FD))
    # t2 now carries zip 10001 as a candidate, which reaches t4 and t5 at once
    res = relax_fd(rel, [1, 2, 3], FD)
    assert res.steps[0] == (frozenset({4, 5}), frozenset())


def test_detection_groups_on_original_lhs():
    rel = make_cities()
    groups = detect_fd_violations(rel, rel.tids, FD).fd["fd1"]
    assert [(g.lhs, dict(g.rhs)) for g in groups] == [
        ((9001,), {"Los Angeles": frozenset({1, 3}), "San Francisco": frozenset({2})}),
        ((10001,), {"New York": frozenset({5}), "San Francisco": frozenset({4})}),
    ]
    rel.mark_checked("fd1", [0, 1, 2])
    assert [g.lhs for g in detect_fd_violations(rel, rel.tids, FD).fd["fd1"]] == [(10001,)]
    assert len(detect_fd_violations(rel, rel.tids, FD, skip_checked=False).fd["fd1"]) == 2


def test_lhs_group_rows():
    rel = make_cities()
    assert lhs_group_rows(rel, [3], FD).tolist() == [3, 4]


def test_hand_probability():
    assert extra_iteration_probability(4, 1, 2) == pytest.approx(0.5, abs=1e-12)
    assert extra_iteration_probability(10, 0, 5) == 0.0
    assert extra_iteration_probability(10, 3, 0) == 0.0
    assert extra_iteration_probability(10, 3, 8) == 1.0
    with pytest.raises(ValueError):
        extra_iteration_probability(4, 1, 5)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n))))
def test_probability_matches_subset_enumeration(args):
    n, vio, ar = args
    assert extra_iteration_probability(n, vio, ar) == pytest.approx(oracles.hit_probability(n, vio, ar), abs=1e-12)


def test_large_n_uses_stable_logs():
    p = extra_iteration_probability(100_000, 50, 2000)
    assert p == pytest.approx(oracles.hit_probability_closed(100_000, 50, 2000), rel=1e-9)


def test_upper_bound_on_example():
    rel = make_cities()
    d = value_frequencies(rel, None, ["zip", "city"])
    q = value_frequencies(rel, [1, 3], ["zip", "city"])
    assert relaxed_size_upper_bound(["zip", "city"], d, q) == 1


def test_upper_bound_rejects_inconsistent_frequencies():
    with pytest.raises(StatisticsError):
        relaxed_size_upper_bound(["a"], {"a": {1: 2}}, {"a": {1: 3}})
    with pytest.raises(StatisticsError):
        relaxed_size_upper_bound(["a"], {"a": {}}, {"a": {1: 1}})


# --- properties --------------------------------------------------------------

SCHEMA = Schema.of([("a", "int"), ("b", "int"), ("c", "int")])


@st.composite
def dirty_relations(draw, cleaned=True):
    n = draw(st.integers(2, 40))
    rows = draw(st.lists(st.lists(st.integers(0, 5), min_size=3, max_size=3), min_size=n, max_size=n))
    rel = Relation.from_rows("r", SCHEMA, rows)
    (fd,) = parse_rules(draw(st.sampled_from(["f = FD r: a -> b", "f = FD r: a, c -> b", "f = FD r: b -> a"])))
    if cleaned and draw(st.booleans()):
        # clean some prefix so candidates take part in matching
        k = draw(st.integers(1, n))
        vs = detect_fd_violations(rel, rel.tids[:k], fd)
        for g in vs.fd.get("f", []):
            apply_fixes(rel, fd_fixes(rel, g, fd))
    answer = draw(st.sets(st.sampled_from(rel.tids), max_size=n))
    return rel, fd, answer


@given(dirty_relations())
def test_relaxation_matches_reference(case):
    rel, fd, answer = case
    res = relax_fd(rel, answer, fd)
    extra, steps = oracles.relax(rel, answer, fd.body.lhs, fd.body.rhs)
    assert set(res.extra) == extra
    assert [(set(a), set(b)) for a, b in res.steps] == steps
    assert res.iterations >= 1 and not (set(res.extra) & set(answer))


@given(dirty_relations(cleaned=False), st.integers(0, 5))
def test_rhs_filter_adds_nothing_in_rhs_step(case, value):
    rel, fd, _ = case
    rhs = rel.attr(fd.body.rhs)
    answer = [t for r, t in enumerate(rel.tids) if rel.cells[r][rhs] == value]
    res = relax_fd(rel, answer, fd)
    assert all(not b for _, b in res.steps)
    d = value_frequencies(rel, None, sorted(fd.attrs))
    q = value_frequencies(rel, answer, sorted(fd.attrs))
    assert len(res.extra) <= relaxed_size_upper_bound(sorted(fd.attrs), d, q)


@given(dirty_relations())
def test_each_iteration_respects_the_bound(case):
    rel, fd, answer = case
    res = relax_fd(rel, answer, fd)
    d = value_frequencies(rel, None, sorted(fd.attrs))
    current = set(answer)
    for by_lhs, by_rhs in res.steps:
        q = value_frequencies(rel, current, sorted(fd.attrs))
        assert len(by_lhs) + len(by_rhs) <= relaxed_size_upper_bound(sorted(fd.attrs), d, q)
        current |= by_lhs | by_rhs


@given(dirty_relations(cleaned=False))
def test_detection_matches_reference(case):
    rel, fd, _ = case
    got = {g.lhs: {k: set(v) for k, v in g.rhs.items()} for g in detect_fd_violations(rel, rel.tids, fd).fd.get("f", [])}
    assert got == oracles.fd_groups(rel, fd.body.lhs, fd.body.rhs)
