"""Exact solvers for the path ILP and for minimum-violation-cost decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

from .constraints import ConstraintSystem, check_violation
from .errors import DimensionError, EnumerationCapError, InfeasibleError
from .trellis import (
    DEFAULT_ENUMERATION_CAP,
    PathAssignment,
    Trellis,
    canonical_key,
    edge_space_size,
    path_score,
    viterbi,
)

_SLACK = 1e-9


def _flow_constraints(n: int, m: int) -> LinearConstraint:
    """Path polytope: one start edge, one end edge, inflow = outflow at every token node."""
    size = edge_space_size(n, m)
    A = lil_matrix((n * m + 2, size))
    rhs = np.zeros(n * m + 2)
    for pos in range(1, n + 1):
        for y in range(m):
            r = (pos - 1) * m + y
            for i in _into(n, m, pos, y):
                A[r, i] += 1
            for i in _out_of(n, m, pos, y):
                A[r, i] -= 1
    A[n * m, :m] = 1
    A[n * m + 1, size - m :] = 1
    rhs[n * m :] = 1
    return LinearConstraint(A.tocsr(), rhs, rhs)


def _into(n: int, m: int, pos: int, y: int) -> list[int]:
    if pos == 1:
        return [y]
    return [m + (pos - 2) * m * m + s * m + y for s in range(m)]


def _out_of(n: int, m: int, pos: int, y: int) -> list[int]:
    if pos == n:
        return [m + (n - 1) * m * m + y]
    return [m + (pos - 1) * m * m + y * m + d for d in range(m)]


def _solve_path_ilp(trellis: Trellis, flow: LinearConstraint, upper: np.ndarray) -> PathAssignment | None:
    res = milp(
        c=-trellis.weights,
        constraints=flow,
        integrality=np.ones(trellis.size),
        bounds=Bounds(np.zeros(trellis.size), upper),
        options={"mip_rel_gap": 0.0},
    )
    if res.x is None:
        return None
    e = np.rint(res.x).astype(np.int64)
    return PathAssignment.from_edges(trellis.alphabet, trellis.n, e)


def solve_unconstrained(trellis: Trellis) -> tuple[PathAssignment, float]:
    """Maximise ``M . e`` over the path polytope with an integer program.

    Independent of the Viterbi recursion.  Ties are resolved to the same
    canonical path by re-solving with the later tokens pinned and trying
    lower labels first.
    """
    n, m = trellis.n, trellis.m
    flow = _flow_constraints(n, m)
    upper = np.ones(trellis.size)
    best = _solve_path_ilp(trellis, flow, upper)
    if best is None:
        raise RuntimeError("path ILP reported no solution")
    z = path_score(trellis, best)
    for pos in range(n, 0, -1):
        for y in range(best.labels[pos - 1]):
            trial = upper.copy()
            _pin(trial, n, m, pos, y)
            cand = _solve_path_ilp(trellis, flow, trial)
            if cand is None:
                continue
            s = path_score(trellis, cand)
            if s >= z - _SLACK * max(1.0, abs(z)):
                best, z = cand, max(z, s)
                break
        _pin(upper, n, m, pos, best.labels[pos - 1])
    return best, path_score(trellis, best)


def _pin(upper: np.ndarray, n: int, m: int, pos: int, y: int) -> None:
    # forbid every edge entering token `pos` with a label other than y
    for other in range(m):
        if other != y:
            upper[_into(n, m, pos, other)] = 0


def score_floor(z_star: float, tau: float) -> float:
    """Lower bound on ``M . e``: ``tau * z_star``, mirrored for negative ``z_star`` so tau=1 is always exact."""
    if z_star >= 0:
        return tau * z_star
    return z_star - (1.0 - tau) * abs(z_star)


@dataclass(frozen=True)
class ConstrainedProblem:
    trellis: Trellis
    system: ConstraintSystem
    tau: float
    z_star: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.system.n != self.trellis.n or self.system.alphabet.m != self.trellis.m:
            raise DimensionError("constraint system and trellis sizes differ")

    @classmethod
    def create(cls, trellis: Trellis, system: ConstraintSystem, tau: float) -> ConstrainedProblem:
        return cls(trellis, system, tau, path_score(trellis, viterbi(trellis)))

    @property
    def floor(self) -> float:
        return score_floor(self.z_star, self.tau)


@dataclass(frozen=True)
class ConstrainedSolution:
    path: PathAssignment
    sigma: np.ndarray
    total_cost: float
    score: float


def total_cost(costs: np.ndarray, sigma) -> float:
    # summed in group order so equal violation sets cost bit-identical amounts
    acc = 0.0
    for c, s in zip(costs, sigma):
        if s:
            acc += float(c)
    return acc


def solve_min_violation(problem: ConstrainedProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> ConstrainedSolution:
    """Cheapest violation set among paths scoring at least the floor.

    Depth-first branch and bound over label prefixes.  A prefix is dropped
    when its optimistic completion misses the floor, or when the groups it
    already violates for certain cost more than the incumbent (or the same,
    with no chance of a higher score).  Ties go to the higher score, then
    to the canonical path order used by :func:`viterbi`.
    """
    trellis, system = problem.trellis, problem.system
    n, m = trellis.n, trellis.m
    if m**n > cap:
        raise EnumerationCapError(m, n, cap)
    floor = problem.floor
    costs = system.costs

    top = viterbi(trellis)
    top_score = path_score(trellis, top)
    if top_score < floor:
        raise InfeasibleError(floor, top_score)
    top_sigma = check_violation(system, top)
    best = [total_cost(costs, top_sigma), top_score, canonical_key(top.labels), top.labels]
    if best[0] == 0.0:
        return ConstrainedSolution(top, top_sigma, 0.0, top_score)

    start, trans, end = trellis.start, trellis.transitions, trellis.end
    # completion[p][j]: best score of edges after token p given label j there
    completion = [None] * n
    completion[n - 1] = end.copy()
    for p in range(n - 2, -1, -1):
        completion[p] = np.max(trans[p] + completion[p + 1][None, :], axis=1)

    H, b = system.matrix, system.constants
    R = H.shape[0]
    row_group = system.row_group
    G = len(system.groups)
    # per-time coefficient blocks: blocks[t][:, src, dst]
    blocks = [H[:, :m].reshape(R, 1, m)]
    for t in range(1, n):
        blocks.append(H[:, m + (t - 1) * m * m : m + t * m * m].reshape(R, m, m))
    blocks.append(H[:, m + (n - 1) * m * m :].reshape(R, m, 1))
    min_out = [blk.min(axis=2) for blk in blocks]  # (R, src)
    tail = np.zeros((n + 2, R))
    for t in range(n, -1, -1):
        tail[t] = tail[t + 1] + blocks[t].min(axis=(1, 2))

    def certain_cost(lower: np.ndarray) -> float:
        hit = np.zeros(G, dtype=np.int64)
        hit[row_group[lower - b > 0.5]] = 1
        return total_cost(costs, hit)

    labels = [0] * n

    def visit(p: int, prev: int, score: float, partial: np.ndarray) -> None:
        weights = start if p == 0 else trans[p - 1][prev]
        col = blocks[p][:, 0, :] if p == 0 else blocks[p][:, prev, :]
        options = weights + completion[p]
        for j in sorted(range(m), key=lambda k: (-options[k], k)):
            optimistic = score + float(options[j])
            if optimistic < floor - _SLACK * max(1.0, abs(floor)):
                continue
            values = partial + col[:, j]
            new_score = score + float(weights[j])
            labels[p] = j
            if p == n - 1:
                final_score = new_score + float(end[j])
                if final_score < floor:
                    continue
                full = values + blocks[n][:, j, 0]
                sigma = np.zeros(G, dtype=np.int64)
                sigma[row_group[full - b > 0.5]] = 1
                cost = total_cost(costs, sigma)
                key = (cost, -final_score, canonical_key(labels))
                if key < (best[0], -best[1], best[2]):
                    best[:] = [cost, final_score, key[2], tuple(labels)]
                continue
            lower = values + min_out[p + 1][:, j] + tail[p + 2]
            lb = certain_cost(lower)
            if lb > best[0]:
                continue
            if lb == best[0] and optimistic < best[1] - _SLACK * max(1.0, abs(best[1])):
                continue
            visit(p + 1, j, new_score, values)

    visit(0, 0, 0.0, np.zeros(R))
    path = PathAssignment(trellis.alphabet, best[3])
    sigma = check_violation(system, path)
    return ConstrainedSolution(path, sigma, total_cost(costs, sigma), path_score(trellis, path))

