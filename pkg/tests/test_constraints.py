from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import alphabet_of
from relcrf.constraints import (
    ADJACENCY,
    BEGIN_END,
    KINDS,
    PRECEDENCE,
    PRESENCE_PRECEDENCE,
    STATE_CHANGE,
    ConstraintSystem,
    ConstraintTemplate,
    check_violation,
    dumps_constraints,
    encode,
    fires,
    holds,
    instantiations,
    loads_constraints,
    mine,
    violation_cost,
)
from relcrf.errors import DataError
from relcrf.trellis import PathAssignment


def _dense(row, size):
    v = np.zeros(size, dtype=int)
    for i, c in row.coefficients:
        v[i] += c
    return v


def test_adjacency_rows_m2_n3():
    ab = alphabet_of(2)
    rows = encode(ConstraintTemplate(ADJACENCY, "A", "B"), 3, ab)
    assert len(rows) == 2
    size = 2 * 4 + 4
    first = _dense(rows[0], size)
    expected = np.zeros(size, dtype=int)
    expected[oracles.offset(0, -1, 0, 3, 2)] = 1  # start -> A entering token 1
    expected[oracles.offset(1, 0, 1, 3, 2)] = -1  # A -> B at t=1
    assert np.array_equal(first, expected)
    second = _dense(rows[1], size)
    expected = np.zeros(size, dtype=int)
    expected[oracles.offset(1, 0, 0, 3, 2)] = 1
    expected[oracles.offset(1, 1, 0, 3, 2)] = 1
    expected[oracles.offset(2, 0, 1, 3, 2)] = -1
    assert np.array_equal(second, expected)
    assert rows[0].constant == rows[1].constant == 0


@pytest.mark.parametrize("n", [1, 2, 5])
def test_begin_end_single_row(n):
    ab = alphabet_of(3)
    rows = encode(ConstraintTemplate(BEGIN_END, "A", "C"), n, ab)
    assert len(rows) == 1
    assert dict(rows[0].coefficients) == {oracles.offset(0, -1, 0, n, 3): 1, oracles.offset(n, 2, -1, n, 3): -1}


def test_template_validation():
    with pytest.raises(ValueError):
        ConstraintTemplate("nope", "A", "B")
    with pytest.raises(ValueError):
        ConstraintTemplate(STATE_CHANGE, "A", "B")
    with pytest.raises(ValueError):
        ConstraintTemplate(ADJACENCY, "A", "B", "C")
    with pytest.raises(ValueError):
        ConstraintTemplate(PRECEDENCE, "A", "A")
    with pytest.raises(ValueError):
        encode(ConstraintTemplate(ADJACENCY, "A", "Z"), 3, alphabet_of(2))


def _all_templates(labels):
    for kind in KINDS:
        for a, b in itertools.product(labels, repeat=2):
            if kind == PRECEDENCE and a == b:
                continue
            if kind == STATE_CHANGE:
                for d in labels:
                    yield ConstraintTemplate(kind, a, b, d)
            else:
                yield ConstraintTemplate(kind, a, b)


def test_rows_agree_with_interpreters_exhaustively():
    checked = 0
    for m in range(1, 4):
        ab = alphabet_of(m)
        for n in range(1, 5):
            for template in _all_templates(ab.labels):
                system = ConstraintSystem.build(ab, n, [template])
                for ys in itertools.product(range(m), repeat=n):
                    path = PathAssignment(ab, ys)
                    rows_ok = bool(np.all(system.row_values(path) <= 0))
                    names = path.label_sequence
                    assert rows_ok == oracles.logic(template.kind, template.a, template.b, template.d, names)
                    assert rows_ok == holds(template, names)
                    assert check_violation(system, path).tolist() == [int(not rows_ok)]
                    checked += 1
    assert checked > 5000


def test_fires_is_needed_for_violation():
    for m in range(1, 4):
        ab = alphabet_of(m)
        for template in _all_templates(ab.labels):
            for n in range(1, 5):
                for ys in itertools.product(ab.labels, repeat=n):
                    if not fires(template, ys):
                        assert holds(template, ys)


def test_empty_system():
    ab = alphabet_of(2)
    system = ConstraintSystem.build(ab, 3, [])
    assert check_violation(system, PathAssignment(ab, (0, 1, 0))).size == 0
    assert system.matrix.shape == (0, 2 * 4 + 4)


def test_adjacency_satisfied_at_its_position():
    ab = alphabet_of(3)
    system = ConstraintSystem.build(ab, 4, [ConstraintTemplate(ADJACENCY, "A", "B")])
    assert check_violation(system, PathAssignment.from_names(ab, "ABCC")).tolist() == [0]
    assert check_violation(system, PathAssignment.from_names(ab, "ACCC")).tolist() == [1]


def test_sigma_is_per_template():
    ab = alphabet_of(3)
    items = [
        (ConstraintTemplate(BEGIN_END, "A", "B"), 1.0),
        (ConstraintTemplate(PRESENCE_PRECEDENCE, "C", "A"), 2.0),
        (ConstraintTemplate(STATE_CHANGE, "A", "B", "C"), 0.5),
    ]
    system = ConstraintSystem.build(ab, 4, items)
    path = PathAssignment.from_names(ab, "ACCB")
    assert check_violation(system, path).tolist() == [0, 1, 1]
    assert system.costs.tolist() == [1.0, 2.0, 0.5]
    assert system.matrix.shape[0] == system.num_rows == len(system.row_group)


def test_negative_cost_rejected():
    with pytest.raises(ValueError):
        ConstraintSystem.build(alphabet_of(2), 2, [(ConstraintTemplate(BEGIN_END, "A", "B"), -1.0)])


def test_cost_examples():
    assert violation_cost(1, 1) == pytest.approx(math.log(2))
    assert violation_cost(9, 0) == pytest.approx(math.log(11))


@given(st.integers(1, 200), st.integers(0, 200))
def test_cost_non_increasing_in_violations(total, k):
    # k violated out of a fixed total
    k = min(k, total)
    if k < total:
        assert violation_cost(total - k - 1, k + 1) <= violation_cost(total - k, k)
    assert violation_cost(total - k, k) >= 0


def test_mine_perfect_begin_end():
    corpus = [("A", "C", "B"), ("A", "B"), ("A", "C", "C", "B")]
    found = {c.template: c for c in mine(corpus)}
    rule = found[ConstraintTemplate(BEGIN_END, "A", "B")]
    assert rule.violation_rate == 0 and rule.support == 3


def test_mine_ignores_absent_label():
    corpus = [("B", "C"), ("C", "B", "C")]
    found = mine(corpus, labels=("A", "B", "C"), max_violation_rate=1.0)
    assert all("A" not in c.template.labels for c in found)


def test_mine_hand_counted_rate():
    # adjacency(A,B) fires in 10 sequences and breaks in one of them
    corpus = [("A", "B", "C")] * 9 + [("A", "C", "B")] + [("C", "B")] * 5
    found = {c.template: c for c in mine(corpus, max_violation_rate=0.1)}
    rule = found[ConstraintTemplate(ADJACENCY, "A", "B")]
    assert (rule.support, rule.violated) == (10, 1)
    assert Fraction(rule.violated, rule.support) == Fraction(1, 10)
    assert rule.cost == pytest.approx(violation_cost(9, 1))
    stricter = {c.template for c in mine(corpus, max_violation_rate=0.09)}
    assert ConstraintTemplate(ADJACENCY, "A", "B") not in stricter


def test_mine_order_and_support_threshold():
    corpus = [("A", "B")] * 4 + [("B", "A")]
    found = mine(corpus, min_support=2, max_violation_rate=0.5)
    keys = [(c.violated / c.support, -c.support, c.template.id) for c in found]
    assert keys == sorted(keys)
    assert all(c.support >= 2 for c in found)


def test_instantiations_state_change_uses_separators():
    kinds = {t.kind for t in instantiations(["A", "B"])}
    assert STATE_CHANGE not in kinds
    sc = [t for t in instantiations(["A", "B", "P"], separators=["P"]) if t.kind == STATE_CHANGE]
    assert sc and all(t.d == "P" for t in sc)


@given(
    st.lists(
        st.tuples(st.sampled_from(KINDS), st.sampled_from("ABC"), st.sampled_from("ABC"), st.sampled_from("ABC")),
        max_size=6,
    ),
    st.lists(st.floats(0, 50, allow_nan=False), min_size=6, max_size=6),
)
@settings(max_examples=60)
def test_constraint_file_round_trip(raw, costs):
    items = []
    for (kind, a, b, d), c in zip(raw, costs):
        if kind == PRECEDENCE and a == b:
            continue
        items.append((ConstraintTemplate(kind, a, b, d if kind == STATE_CHANGE else None), c))
    assert loads_constraints(dumps_constraints(items)) == items


def test_constraint_file_errors():
    with pytest.raises(DataError, match="line 2"):
        loads_constraints("# header\nadjacency\tA\n")
    with pytest.raises(DataError):
        loads_constraints("precedence\tA\tA\t1.0\n")
