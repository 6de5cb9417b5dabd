"""Lagrangian relaxation of hard constraint rows with projected subgradient descent.

Relaxing ``H . e <= b`` with multipliers ``lam >= 0`` leaves

    L(lam) = max_e (M - H^T lam) . e + lam . b

which is a plain Viterbi problem over penalised edge weights.  ``L`` is
convex and piecewise linear in ``lam`` and bounds the constrained optimum
from above.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .constraints import ConstraintSystem
from .errors import DimensionError
from .trellis import PathAssignment, Trellis, path_score, viterbi

StepRule = Callable[[int], float]

OPTIMAL = "optimal"
FEASIBLE = "feasible"
NO_FEASIBLE = "no_feasible"


def harmonic_step(k: int) -> float:
    return 1.0 / (k + 1)


def _check_lambda(system: ConstraintSystem, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (system.num_rows,):
        raise DimensionError(f"expected {system.num_rows} multipliers, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("Lagrange multipliers must be non-negative")
    return lam


def dual_value(trellis: Trellis, system: ConstraintSystem, lam) -> tuple[float, PathAssignment]:
    """``L(lam)`` and the path attaining it."""
    lam = _check_lambda(system, lam)
    if system.n != trellis.n or system.alphabet.m != trellis.m:
        raise DimensionError("constraint system and trellis sizes differ")
    if lam.size:
        penalised = trellis.with_weights(trellis.weights - system.matrix.T @ lam)
    else:
        penalised = trellis
    path = viterbi(penalised)
    value = path_score(penalised, path)
    if lam.size:
        value += float(lam @ system.constants)
    return value, path


def subgradient(system: ConstraintSystem, path: PathAssignment) -> np.ndarray:
    """Row violations ``H . e - b``; ``L`` decreases along their negation.

    All entries ``<= 0`` means the path meets every hard row.
    """
    return system.row_values(path)


@dataclass
class LagrangeState:
    lam: np.ndarray
    k: int = 0
    best_dual: float = math.inf
    best_path: PathAssignment | None = None
    subgradient: np.ndarray | None = None
    step_rule: StepRule = harmonic_step
    max_iterations: int = 200


@dataclass(frozen=True)
class TraceRow:
    k: int
    dual: float
    best_dual: float
    gnorm: float
    feasible: bool
    theta: float


@dataclass(frozen=True)
class DualResult:
    path: PathAssignment
    status: str
    best_dual: float
    best_primal: float
    lam: np.ndarray
    iterations: int
    trace: list[TraceRow] = field(repr=False)

    @property
    def gap(self) -> float:
        """Best dual minus best feasible primal score (inf when nothing feasible was seen)."""
        return self.best_dual - self.best_primal

    @property
    def history(self) -> list[float]:
        return [row.dual for row in self.trace]


def solve_dual(
    trellis: Trellis,
    system: ConstraintSystem,
    max_iterations: int = 200,
    tolerance: float = 1e-6,
    *,
    step_rule: StepRule = harmonic_step,
    patience: int | None = None,
) -> DualResult:
    """Projected subgradient descent on ``L`` from ``lam = 0``.

    Each iteration decodes ``e_k``, forms ``g_k = H e_k - b`` and moves
    ``lam <- max(0, lam + theta_k g_k / |g_k|)``.  The run stops once
    ``e_k`` is feasible with complementary slackness (which certifies
    optimality), after ``max_iterations`` iterations, or after
    ``patience`` iterations in a row that lower the best dual by no more
    than ``tolerance``.

    The returned path is the best-scoring feasible ``e_k`` seen, or the
    maximiser at the best dual when none was feasible.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    patience = max_iterations if patience is None else patience
    state = LagrangeState(np.zeros(system.num_rows), step_rule=step_rule, max_iterations=max_iterations)
    best_primal, primal_path = -math.inf, None
    dual_path = None
    stale = 0
    status = NO_FEASIBLE
    trace: list[TraceRow] = []

    while state.k < max_iterations:
        k = state.k
        value, path = dual_value(trellis, system, state.lam)
        g = subgradient(system, path)
        state.subgradient = g
        state.best_path = path
        if value < state.best_dual - tolerance:
            stale = 0
        else:
            stale += 1
        if value < state.best_dual:
            state.best_dual = value
            dual_path = path

        feasible = bool(np.all(g <= 0))
        if feasible:
            score = path_score(trellis, path)
            if score > best_primal:
                best_primal, primal_path = score, path
        gnorm = float(np.linalg.norm(g))
        theta = step_rule(k)
        trace.append(TraceRow(k, value, state.best_dual, gnorm, feasible, theta))
        state.k += 1

        if feasible and abs(float(state.lam @ g)) <= tolerance:
            status = OPTIMAL
            break
        if stale >= patience:
            break
        state.lam = np.maximum(0.0, state.lam + theta * g / gnorm)

    if status != OPTIMAL and primal_path is not None:
        status = OPTIMAL if state.best_dual - best_primal <= tolerance else FEASIBLE
    return DualResult(
        path=primal_path if primal_path is not None else dual_path,
        status=status,
        best_dual=state.best_dual,
        best_primal=best_primal,
        lam=state.lam.copy(),
        iterations=state.k,
        trace=trace,
    )


TRACE_HEADER = ("k", "L(lambda_k)", "||g_k||", "feasible", "theta_k")


def write_trace_csv(trace: list[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for row in trace:
            writer.writerow([row.k, f"{row.dual:.17g}", f"{row.gnorm:.17g}", str(row.feasible).lower(), f"{row.theta:.17g}"])
