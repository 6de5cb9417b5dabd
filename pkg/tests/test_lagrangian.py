from __future__ import annotations

import csv
import math

import numpy as np
import pytest

import oracles
from conftest import alphabet_of, random_instance, random_trellis
from relcrf.constraints import ADJACENCY, BEGIN_END, ConstraintSystem, ConstraintTemplate
from relcrf.errors import DimensionError
from relcrf.lagrangian import (
    FEASIBLE,
    NO_FEASIBLE,
    OPTIMAL,
    TRACE_HEADER,
    dual_value,
    harmonic_step,
    solve_dual,
    subgradient,
    write_trace_csv,
)
from relcrf.trellis import PathAssignment, Trellis, edge_space_size, path_score, viterbi


def _system(trellis, constraints):
    return ConstraintSystem.build(trellis.alphabet, trellis.n, constraints)


def _hard_opt(trellis, system):
    return oracles.hard_optimum(trellis.weights, trellis.n, trellis.m, system.matrix, system.constants)


def test_zero_multipliers_give_viterbi(rng):
    tr, constraints = random_instance(rng)
    system = _system(tr, constraints)
    value, path = dual_value(tr, system, np.zeros(system.num_rows))
    assert path == viterbi(tr)
    assert value == path_score(tr, viterbi(tr))


def test_begin_end_penalty_by_enumeration(rng):
    tr = random_trellis(rng, 2, 2)
    system = _system(tr, [ConstraintTemplate(BEGIN_END, "A", "B")])
    expected = max(
        oracles.path_sum(tr.weights, ys, 2) - 5.0 * (int(ys[0] == 0) - int(ys[-1] == 1))
        for ys in oracles.all_sequences(2, 2)
    )
    value, _ = dual_value(tr, system, [5.0])
    assert value == pytest.approx(expected, abs=1e-12)


def test_weak_duality(rng):
    checked = 0
    while checked < 40:
        tr, constraints = random_instance(rng)
        system = _system(tr, constraints)
        opt = _hard_opt(tr, system)
        if opt == -math.inf or system.num_rows == 0:
            continue
        for _ in range(50):
            lam = rng.exponential(rng.choice([0.1, 1.0, 10.0]), system.num_rows)
            assert dual_value(tr, system, lam)[0] >= opt - 1e-9
        checked += 1


def test_convexity_and_subgradient_inequality(rng):
    for _ in range(40):
        tr, constraints = random_instance(rng)
        system = _system(tr, constraints)
        if system.num_rows == 0:
            continue
        for _ in range(30):
            l1 = rng.exponential(2.0, system.num_rows)
            l2 = rng.exponential(2.0, system.num_rows)
            a = rng.uniform()
            v1, p1 = dual_value(tr, system, l1)
            v2, _ = dual_value(tr, system, l2)
            mid, _ = dual_value(tr, system, a * l1 + (1 - a) * l2)
            assert mid <= a * v1 + (1 - a) * v2 + 1e-9
            g = -subgradient(system, p1)  # b - H e at lambda_1's maximiser
            assert v2 >= v1 + float(g @ (l2 - l1)) - 1e-9


def test_subgradient_zero_on_tight_rows():
    ab = alphabet_of(2)
    system = ConstraintSystem.build(ab, 3, [ConstraintTemplate(BEGIN_END, "A", "B")])
    assert subgradient(system, PathAssignment.from_names(ab, "AAB")).tolist() == [0]


def test_subgradient_marks_the_broken_row():
    ab = alphabet_of(2)
    system = ConstraintSystem.build(ab, 3, [ConstraintTemplate(ADJACENCY, "A", "B")])
    assert subgradient(system, PathAssignment.from_names(ab, "AAB")).tolist() == [1, 0]


def test_multiplier_checks():
    tr = random_trellis(np.random.default_rng(0), 2, 3)
    system = _system(tr, [ConstraintTemplate(BEGIN_END, "A", "B")])
    with pytest.raises(DimensionError):
        dual_value(tr, system, [1.0, 2.0])
    with pytest.raises(ValueError):
        dual_value(tr, system, [-1.0])
    with pytest.raises(ValueError):
        solve_dual(tr, system, max_iterations=0)


def test_satisfied_system_stops_at_once():
    ab = alphabet_of(2)
    w = np.zeros(edge_space_size(3, 2))
    w[oracles.offset(0, -1, 0, 3, 2)] = 2.0
    w[oracles.offset(3, 1, -1, 3, 2)] = 2.0
    tr = Trellis(ab, 3, w)
    result = solve_dual(tr, _system(tr, [ConstraintTemplate(BEGIN_END, "A", "B")]))
    assert result.iterations == 1
    assert result.status == OPTIMAL
    assert result.path == viterbi(tr)
    assert not result.lam.any()


def test_violated_begin_end_run():
    ab = alphabet_of(2)
    w = np.zeros(edge_space_size(3, 2))
    w[oracles.offset(0, -1, 0, 3, 2)] = 2.0  # start in A
    w[oracles.offset(3, 0, -1, 3, 2)] = 1.0  # end in A
    w[oracles.offset(2, 0, 0, 3, 2)] = 0.5
    tr = Trellis(ab, 3, w)
    system = _system(tr, [ConstraintTemplate(BEGIN_END, "A", "B")])
    assert subgradient(system, viterbi(tr))[0] > 0
    result = solve_dual(tr, system)
    opt = _hard_opt(tr, system)
    assert result.best_dual >= opt - 1e-9
    best = [row.best_dual for row in result.trace]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert result.status in (OPTIMAL, FEASIBLE)
    assert bool(np.all(subgradient(system, result.path) <= 0))
    assert path_score(tr, result.path) == result.best_primal


def test_best_dual_non_increasing_and_returned_path_feasible(rng):
    for _ in range(80):
        tr, constraints = random_instance(rng)
        system = _system(tr, constraints)
        result = solve_dual(tr, system, 50)
        best = [row.best_dual for row in result.trace]
        assert best == sorted(best, reverse=True)
        assert result.best_dual == min(row.dual for row in result.trace)
        if result.status == NO_FEASIBLE:
            assert result.best_primal == -math.inf
        else:
            assert bool(np.all(subgradient(system, result.path) <= 0))
            assert result.gap >= -1e-9


def test_patience_stops_early(rng):
    tr, constraints = random_instance(rng)
    system = _system(tr, constraints)
    result = solve_dual(tr, system, 200, patience=1)
    assert result.iterations <= 200


def test_harmonic_series_diverges():
    total = math.fsum(harmonic_step(k) for k in range(1000))
    assert total == pytest.approx(math.fsum(1 / j for j in range(1, 1001)))
    assert total > 7.0
    assert math.fsum(harmonic_step(k) for k in range(100000)) > total + 4.0


def test_trace_csv(tmp_path, rng):
    tr, constraints = random_instance(rng)
    result = solve_dual(tr, _system(tr, constraints), 20)
    path = tmp_path / "trace.csv"
    write_trace_csv(result.trace, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_HEADER
    assert len(rows) == len(result.trace) + 1
    assert float(rows[1][1]) == result.trace[0].dual
