import itertools

import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import make_cities
from qclean.errors import RepairError
from qclean.model import Candidate, Range, Relation, Schema, Uncertain
from qclean.relax import DCViolation, detect_fd_violations
from qclean.repair import (FDIndex, FixSet, dc_fixes, fd_fixes, merge_fixes, multi_atom_combinations, pair_id,
                           split_pair_id, violated_atoms)
from qclean.rules import parse_rules

FD = parse_rules("fd1 = FD cities: zip -> city")[0]
SAL = Schema.of([("salary", "int"), ("tax", "float"), ("age", "int")])


def groups_of(rel, fd=FD):
    return detect_fd_violations(rel, rel.tids, fd).fd[fd.id]


def as_table(cell):
    return {pid: {c.value: round(c.prob, 12) for c in cands} for pid, cands in cell.groups().items()}


def test_pair_id_round_trip():
    pid = pair_id(7, ["fd2", "fd1"], "rhs")
    assert pid == "7:fd1+fd2:rhs"
    assert split_pair_id(pid) == (7, ("fd1", "fd2"), "rhs")


def test_fixes_for_the_9001_group():
    rel = make_cities()
    fs = fd_fixes(rel, groups_of(rel)[0], FD)
    cells = dict(fs)
    assert sorted(cells) == [(1, "city"), (2, "city"), (2, "zip"), (3, "city")]
    for t in (1, 2, 3):
        assert as_table(cells[(t, "city")]) == {f"{t}:fd1:rhs": {"Los Angeles": round(2 / 3, 12),
                                                                   "San Francisco": round(1 / 3, 12)}}
    assert as_table(cells[(2, "zip")]) == {"2:fd1:lhs": {9001: 0.5, 10001: 0.5}}
    assert {c.value: c.provenance for c in cells[(1, "city")].candidates} == {
        "Los Angeles": frozenset({1, 3}), "San Francisco": frozenset({2})}


def test_fixes_for_the_10001_group():
    rel = make_cities()
    cells = dict(fd_fixes(rel, groups_of(rel)[1], FD))
    assert as_table(cells[(4, "city")]) == {"4:fd1:rhs": {"New York": 0.5, "San Francisco": 0.5}}
    assert as_table(cells[(5, "city")]) == {"5:fd1:rhs": {"New York": 0.5, "San Francisco": 0.5}}
    assert as_table(cells[(4, "zip")]) == {"4:fd1:lhs": {9001: 0.5, 10001: 0.5}}
    assert (5, "zip") not in cells  # New York occurs with one zip only


def test_probabilities_are_conditional_frequencies():
    rel = Relation.from_rows("r", Schema.of([("a", "int"), ("b", "int")]),
                             [[1, 1], [1, 1], [1, 2], [2, 2], [3, 2], [1, 3]])
    (fd,) = parse_rules("f = FD r: a -> b")
    cells = dict(fd_fixes(rel, groups_of(rel, fd)[0], fd))
    assert {c.value: c.prob for c in cells[(3, "b")].candidates} == pytest.approx(oracles.conditional(rel, ["a"], [1], "b"))
    assert {c.value: c.prob for c in cells[(3, "a")].candidates} == pytest.approx(oracles.conditional(rel, ["b"], [2], "a"))


def test_composite_lhs_marginals_share_a_pair_id():
    rel = Relation.from_rows("r", Schema.of([("a", "int"), ("c", "int"), ("b", "int")]),
                             [[1, 1, 5], [1, 1, 6], [2, 1, 6], [2, 3, 6]])
    (fd,) = parse_rules("f = FD r: a, c -> b")
    cells = dict(fd_fixes(rel, groups_of(rel, fd)[0], fd))
    assert as_table(cells[(2, "a")]) == {"2:f:lhs": {1: round(1 / 3, 12), 2: round(2 / 3, 12)}}
    assert as_table(cells[(2, "c")]) == {"2:f:lhs": {1: round(2 / 3, 12), 3: round(1 / 3, 12)}}


def test_dc_fixes_on_salary_tax_example():
    rel = Relation.from_rows("emp", SAL, [[1000, 0.1, 31], [3000, 0.2, 32], [2000, 0.3, 43]])
    (dc,) = parse_rules("dc1 = DC emp: !(t1.salary < t2.salary & t1.tax > t2.tax)")
    assert violated_atoms(rel, dc, 3, 2) == (0, 1)
    assert violated_atoms(rel, dc, 1, 2) is None
    cells = dict(dc_fixes(rel, DCViolation(3, 2, (0, 1)), dc))
    assert as_table(cells[(2, "salary")]) == {"2:dc1:atom-0": {3000: 0.5, Range("<", 2000): 0.5}}
    assert as_table(cells[(2, "tax")]) == {"2:dc1:atom-1": {0.2: 0.5, Range(">", 0.3): 0.5}}
    assert as_table(cells[(3, "salary")]) == {"3:dc1:atom-0": {2000: 0.5, Range(">", 3000): 0.5}}
    assert all(c.provenance == {3} for c in cells[(2, "salary")].candidates)
    with pytest.raises(RepairError):
        dc_fixes(rel, DCViolation(1, 2, (0, 1)), dc)


def test_literal_atoms_use_the_complement():
    rel = Relation.from_rows("emp", SAL, [[1000, 0.4, 31], [3000, 0.2, 32]])
    (dc,) = parse_rules("d = DC emp: !(t1.salary < t2.salary & t1.tax > 0.3)")
    cells = dict(dc_fixes(rel, DCViolation(1, 2, (0, 1)), dc))
    assert as_table(cells[(1, "tax")]) == {"1:d:atom-1": {0.4: 0.5, Range("<=", 0.3): 0.5}}


def test_three_atom_combinations():
    rel = Relation.from_rows("emp", SAL, [[1000, 0.1, 31], [3000, 0.2, 44], [2000, 0.3, 43]])
    (dc,) = parse_rules("d = DC emp: !(t1.salary < t2.salary & t1.age < t2.age & t1.tax > t2.tax)")
    v = DCViolation(3, 2, violated_atoms(rel, dc, 3, 2))
    combos = multi_atom_combinations(rel, v, dc)
    assert len(combos) == 2 ** 3 - 1
    sizes = [len({a for _, a in fs.cells}) for fs in combos]
    assert sizes == [1, 1, 1, 2, 2, 2, 3]
    full = dict(combos[-1])
    assert full[(2, "age")].candidates[0].value == Range("<", 43)
    assert all(len(c.candidates) == 1 and c.candidates[0].prob == 1.0 for c in full.values())


def test_merge_rejects_conflicting_originals():
    a = Uncertain(1, (Candidate(1, 0.5, "1:f:rhs"), Candidate(2, 0.5, "1:f:rhs")))
    with pytest.raises(RepairError):
        merge_fixes(5, a)
    with pytest.raises(RepairError):
        merge_fixes(Uncertain(3, (Candidate(3, 0.5, "1:g:rhs"), Candidate(2, 0.5, "1:g:rhs"))), a)
    assert merge_fixes(1, a) == a
    assert merge_fixes(a, None) == a


def test_merge_of_same_side_unions_provenance_and_rules():
    a = Uncertain("x", (Candidate("x", 0.5, "1:f:rhs", frozenset({1})), Candidate("y", 0.5, "1:f:rhs", frozenset({2}))))
    b = Uncertain("x", (Candidate("x", 0.5, "1:g:rhs", frozenset({1})), Candidate("z", 0.5, "1:g:rhs", frozenset({3}))))
    m = merge_fixes(a, b)
    assert list(m.groups()) == ["1:f+g:rhs"]
    assert {c.value: c.provenance for c in m.candidates} == {"x": {1}, "y": {2}, "z": {3}}
    assert as_table(m) == {"1:f+g:rhs": {"x": round(1 / 3, 12), "y": round(1 / 3, 12), "z": round(1 / 3, 12)}}
    m.validate()


def test_fixset_add_merges():
    fs = FixSet()
    a = Uncertain(1, (Candidate(1, 0.5, "1:f:rhs"), Candidate(2, 0.5, "1:f:rhs")))
    fs.add(1, "b", a)
    fs.add(1, "b", a)
    assert len(fs) == 1 and dict(fs)[(1, "b")] == a


# --- properties --------------------------------------------------------------

@st.composite
def fd_instances(draw):
    n = draw(st.integers(3, 30))
    rows = draw(st.lists(st.lists(st.integers(0, 3), min_size=3, max_size=3), min_size=n, max_size=n))
    rel = Relation.from_rows("r", Schema.of([("a", "int"), ("b", "int"), ("c", "int")]), rows)
    rules = parse_rules("f1 = FD r: a -> b\nf2 = FD r: c -> b\nf3 = FD r: b -> c")
    return rel, rules


def all_fixes(rel, rules):
    out = []
    for fd in rules:
        ix = FDIndex(rel, fd)
        for g in detect_fd_violations(rel, rel.tids, fd).fd.get(fd.id, []):
            out.extend(fd_fixes(rel, g, fd, ix))
    return out


@given(fd_instances(), st.randoms(use_true_random=False))
def test_merge_is_order_independent(case, rnd):
    rel, rules = case
    fixes = all_fixes(rel, rules)
    if not fixes:
        return

    def fold(seq):
        cells = {}
        for key, cell in seq:
            cells[key] = merge_fixes(cells.get(key, cell.original), cell)
        return cells

    base = fold(fixes)
    shuffled = list(fixes)
    rnd.shuffle(shuffled)
    assert fold(shuffled) == base
    assert fold(fixes + fixes) == base  # idempotent
    for cell in base.values():
        cell.validate()


@given(fd_instances())
def test_every_fix_group_is_a_distribution(case):
    rel, rules = case
    for (tid, attr), cell in all_fixes(rel, rules):
        cell.validate()
        assert cell.original == rel.original(rel.row_of[tid], rel.attr(attr))
        for pid in cell.groups():
            assert split_pair_id(pid)[0] == tid


def test_dc_pair_orientations_cover_both_tuples():
    rel = Relation.from_rows("emp", SAL, [[1000, 0.5, 1], [2000, 0.1, 2]])
    (dc,) = parse_rules("d = DC emp: !(t1.salary < t2.salary & t1.tax > t2.tax)")
    keys = set(dict(dc_fixes(rel, DCViolation(1, 2, (0, 1)), dc)))
    assert keys == set(itertools.product([1, 2], ["salary", "tax"]))
