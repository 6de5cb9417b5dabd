"""Non-local label constraints and their linear encoding over trellis edges.

Five templates are supported (positions are 1-based, ``n`` tokens):

``adjacency(A, B)``
    every A at a position ``< n`` is immediately followed by B.
``precedence(A, B)``
    every A at a position ``< n`` has a B somewhere after it.
``state_change(A, D, B)``
    every D at a position ``< n`` is preceded by A and followed by B.
``begin_end(A, B)``
    a sequence starting with A ends with B.
``presence_precedence(A, B)``
    no B occurs before an A.

Each template becomes a group of rows ``h . e - b <= 0`` that all hold for a
path exactly when the logical statement holds for its label sequence.  A
group shares one violation indicator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DimensionError
from .trellis import LabelAlphabet, PathAssignment, edge_space_size

ADJACENCY = "adjacency"
PRECEDENCE = "precedence"
STATE_CHANGE = "state_change"
BEGIN_END = "begin_end"
PRESENCE_PRECEDENCE = "presence_precedence"
KINDS = (ADJACENCY, PRECEDENCE, STATE_CHANGE, BEGIN_END, PRESENCE_PRECEDENCE)

COST_SMOOTHING = 1.0


@dataclass(frozen=True, order=True)
class ConstraintTemplate:
    kind: str
    a: str
    b: str
    d: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if (self.kind == STATE_CHANGE) != (self.d is not None):
            raise ValueError("only state_change takes a third label D")
        if self.kind == PRECEDENCE and self.a == self.b:
            raise ValueError(f"precedence({self.a}, {self.a}) is rejected as vacuous")

    @property
    def id(self) -> str:
        if self.kind == STATE_CHANGE:
            return f"{self.kind}({self.a},{self.d},{self.b})"
        return f"{self.kind}({self.a},{self.b})"

    @property
    def labels(self) -> tuple[str, ...]:
        return (self.a, self.b) if self.d is None else (self.a, self.b, self.d)

    def __str__(self) -> str:
        return self.id


def holds(template: ConstraintTemplate, labels: Sequence[str]) -> bool:
    """Direct reading of the template on a label sequence."""
    n = len(labels)
    a, b, d = template.a, template.b, template.d
    kind = template.kind
    if kind == ADJACENCY:
        return all(labels[i + 1] == b for i in range(n - 1) if labels[i] == a)
    if kind == PRECEDENCE:
        return all(b in labels[i + 1 :] for i in range(n - 1) if labels[i] == a)
    if kind == STATE_CHANGE:
        return all(i > 0 and labels[i - 1] == a and labels[i + 1] == b for i in range(n - 1) if labels[i] == d)
    if kind == BEGIN_END:
        return labels[0] != a or labels[-1] == b
    seen_b = False
    for y in labels:
        if y == a and seen_b:
            return False
        if y == b:
            seen_b = True
    return True


def fires(template: ConstraintTemplate, labels: Sequence[str]) -> bool:
    """Whether the template's antecedent occurs, i.e. the sequence can violate it at all."""
    kind = template.kind
    if kind in (ADJACENCY, PRECEDENCE):
        return template.a in labels[:-1]
    if kind == STATE_CHANGE:
        return template.d in labels[:-1]
    if kind == BEGIN_END:
        return labels[0] == template.a
    # presence_precedence only says something once both labels occur
    if template.a == template.b:
        return list(labels).count(template.a) >= 2
    return template.a in labels and template.b in labels


@dataclass(frozen=True)
class LinearRow:
    """``sum(coefficients[i] * e[i]) - constant <= 0`` when satisfied."""

    coefficients: tuple[tuple[int, int], ...]
    constant: int = 0

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("a row needs at least one non-zero coefficient")
        if self.constant not in (0, 1):
            raise ValueError(f"row constant must be 0 or 1, got {self.constant}")

    def value(self, e) -> int:
        return sum(c * int(e[i]) for i, c in self.coefficients) - self.constant


def _row(terms: Iterable[tuple[int, int]], constant: int = 0) -> LinearRow | None:
    acc: dict[int, int] = {}
    for idx, coef in terms:
        acc[idx] = acc.get(idx, 0) + coef
    coefs = tuple(sorted((i, c) for i, c in acc.items() if c))
    return LinearRow(coefs, constant) if coefs else None


class _Edges:
    """Integer edge lookups for one (n, m) trellis, 1-based token positions."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m

    def index(self, t: int, src: int, dst: int) -> int:
        n, m = self.n, self.m
        if t == 0:
            return dst
        if t == n:
            return m + (n - 1) * m * m + src
        return m + (t - 1) * m * m + src * m + dst

    def into(self, pos: int, label: int, skip_from: int | None = None) -> list[int]:
        """Edges at time ``pos - 1`` entering ``label`` at token ``pos``."""
        if pos == 1:
            return [self.index(0, -1, label)]
        return [self.index(pos - 1, y, label) for y in range(self.m) if y != skip_from]

    def out_of(self, pos: int, label: int, skip_to: int | None = None) -> list[int]:
        """Edges at time ``pos`` leaving ``label`` at token ``pos``."""
        if pos == self.n:
            return [self.index(self.n, label, -1)]
        return [self.index(pos, label, y) for y in range(self.m) if y != skip_to]


def encode(template: ConstraintTemplate, n: int, alphabet: LabelAlphabet) -> list[LinearRow]:
    """Linear rows of ``template`` for a length-``n`` sequence.

    An empty list means the template cannot be violated at this length.
    """
    if n < 1:
        raise DimensionError(f"sequence length must be >= 1, got {n}")
    for name in template.labels:
        if name not in alphabet:
            raise ValueError(f"{template.id} names label {name!r} outside the alphabet")
    ix = alphabet.index
    A, B = ix(template.a), ix(template.b)
    E = _Edges(n, alphabet.m)
    rows: list[LinearRow | None] = []
    kind = template.kind
    if kind == ADJACENCY:
        for t in range(1, n):
            terms = [(i, 1) for i in E.into(t, A)] + [(E.index(t, A, B), -1)]
            rows.append(_row(terms))
    elif kind == PRECEDENCE:
        for t in range(1, n):
            terms = [(i, 1) for i in E.into(t, A)]
            for z in range(1, n - t + 1):
                terms += [(i, -1) for i in E.out_of(t + z, B)]
            rows.append(_row(terms))
    elif kind == STATE_CHANGE:
        D = ix(template.d)
        for t in range(1, n):
            rows.append(_row((i, 1) for i in E.into(t, D, skip_from=A)))
            rows.append(_row((i, 1) for i in E.out_of(t, D, skip_to=B)))
    elif kind == BEGIN_END:
        rows.append(_row([(E.index(0, -1, A), 1), (E.index(n, B, -1), -1)]))
    else:
        for t in range(2, n + 1):
            for earlier in range(1, t):
                terms = [(i, 1) for i in E.into(t, A)] + [(i, 1) for i in E.into(earlier, B)]
                rows.append(_row(terms, constant=1))
    return [r for r in rows if r is not None]


@dataclass(frozen=True)
class ConstraintGroup:
    template: ConstraintTemplate
    rows: tuple[LinearRow, ...]
    cost: float = 0.0

    @property
    def vacuous(self) -> bool:
        return not self.rows


@dataclass(frozen=True)
class ConstraintSystem:
    alphabet: LabelAlphabet
    n: int
    groups: tuple[ConstraintGroup, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        size = edge_space_size(self.n, self.alphabet.m)
        for g in self.groups:
            if g.cost < 0 or not math.isfinite(g.cost):
                raise ValueError(f"cost of {g.template.id} must be finite and >= 0")
            for row in g.rows:
                if any(not 0 <= i < size for i, _ in row.coefficients):
                    raise DimensionError(f"{g.template.id} touches an edge outside [0, {size})")

    @classmethod
    def build(cls, alphabet: LabelAlphabet, n: int, constraints: Iterable) -> ConstraintSystem:
        """From templates or ``(template, cost)`` pairs."""
        groups = []
        for item in constraints:
            template, cost = item if isinstance(item, tuple) else (item, 0.0)
            groups.append(ConstraintGroup(template, tuple(encode(template, n, alphabet)), float(cost)))
        return cls(alphabet, n, tuple(groups))

    @property
    def num_rows(self) -> int:
        return sum(len(g.rows) for g in self.groups)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense H with one row per LinearRow, groups in order."""
        H = np.zeros((self.num_rows, edge_space_size(self.n, self.alphabet.m)))
        r = 0
        for g in self.groups:
            for row in g.rows:
                for i, c in row.coefficients:
                    H[r, i] = c
                r += 1
        H.flags.writeable = False
        return H

    @cached_property
    def constants(self) -> np.ndarray:
        b = np.array([row.constant for g in self.groups for row in g.rows], dtype=float)
        b.flags.writeable = False
        return b

    @cached_property
    def row_group(self) -> np.ndarray:
        return np.array([k for k, g in enumerate(self.groups) for _ in g.rows], dtype=np.int64)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([g.cost for g in self.groups], dtype=float)

    def row_values(self, path: PathAssignment) -> np.ndarray:
        """``H . e - b`` for the given path."""
        if path.n != self.n or path.alphabet.m != self.alphabet.m:
            raise DimensionError(f"path (n={path.n}, m={path.alphabet.m}) does not fit system (n={self.n}, m={self.alphabet.m})")
        if not self.num_rows:
            return np.zeros(0)
        return self.matrix[:, path.edge_indices()].sum(axis=1) - self.constants


def check_violation(system: ConstraintSystem, path: PathAssignment) -> np.ndarray:
    """Binary vector, one entry per group: 1 iff some row of the group is violated."""
    values = system.row_values(path)
    sigma = np.zeros(len(system.groups), dtype=np.int64)
    if values.size:
        np.maximum.at(sigma, system.row_group, (values > 0).astype(np.int64))
    return sigma


def violation_cost(support_satisfied: int, support_violated: int, smoothing: float = COST_SMOOTHING) -> float:
    """Negative log of the add-``smoothing`` estimate of the violation probability."""
    if support_satisfied < 0 or support_violated < 0:
        raise ValueError("counts must be non-negative")
    if support_satisfied + support_violated < 1:
        raise ValueError("violation cost needs at least one supporting sequence")
    total = support_satisfied + support_violated
    return -math.log(support_violated + smoothing) + math.log(total + 2 * smoothing)


def instantiations(labels: Sequence[str], separators: Sequence[str] = ()) -> list[ConstraintTemplate]:
    """Every template over ``labels``; state_change only with D drawn from ``separators``."""
    out = []
    for a, b in itertools.product(labels, repeat=2):
        out.append(ConstraintTemplate(ADJACENCY, a, b))
        if a != b:
            out.append(ConstraintTemplate(PRECEDENCE, a, b))
        out.append(ConstraintTemplate(BEGIN_END, a, b))
        out.append(ConstraintTemplate(PRESENCE_PRECEDENCE, a, b))
        for d in separators:
            out.append(ConstraintTemplate(STATE_CHANGE, a, b, d))
    return out


@dataclass(frozen=True)
class MinedConstraint:
    template: ConstraintTemplate
    support: int
    violated: int

    @property
    def violation_rate(self) -> float:
        return self.violated / self.support if self.support else 0.0

    @property
    def cost(self) -> float:
        return violation_cost(self.support - self.violated, self.violated)

    def __iter__(self):
        return iter((self.template, self.support, self.violation_rate))


def mine(
    corpus: Sequence[Sequence[str]],
    min_support: int = 1,
    max_violation_rate: float = 0.0,
    *,
    labels: Sequence[str] | None = None,
    separators: Sequence[str] = (),
) -> list[MinedConstraint]:
    """Frequency-based template mining over gold label sequences.

    Support counts sequences in which the template's antecedent fires; the
    violation rate is the share of those sequences breaking it.  A template
    naming a label that never occurs in ``corpus`` has no support.  Output
    is ordered by rate, then support (descending), then template id.
    """
    seen: dict[str, None] = {}
    for seq in corpus:
        for y in seq:
            seen.setdefault(y, None)
    if labels is None:
        labels = list(seen)
    found = []
    for template in instantiations(labels, separators):
        if any(name not in seen for name in template.labels):
            continue
        support = violated = 0
        for seq in corpus:
            if seq and fires(template, seq):
                support += 1
                violated += not holds(template, seq)
        if support == 0 or support < min_support:
            continue
        if Fraction(violated, support) > Fraction(max_violation_rate).limit_denominator(10**9):
            continue
        found.append(MinedConstraint(template, support, violated))
    found.sort(key=lambda c: (Fraction(c.violated, c.support), -c.support, c.template.id))
    return found


def dumps_constraints(constraints: Iterable[tuple[ConstraintTemplate, float]]) -> str:
    lines = ["# kind\tA\tB[\tD]\tcost"]
    for template, cost in constraints:
        fields = [template.kind, template.a, template.b]
        if template.d is not None:
            fields.append(template.d)
        fields.append(f"{float(cost):.17g}")
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def loads_constraints(text: str) -> list[tuple[ConstraintTemplate, float]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        try:
            if len(parts) == 4:
                template = ConstraintTemplate(parts[0], parts[1], parts[2])
            elif len(parts) == 5:
                template = ConstraintTemplate(parts[0], parts[1], parts[2], parts[3])
            else:
                raise ValueError(f"expected 4 or 5 tab-separated fields, got {len(parts)}")
            cost = float(parts[-1])
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
        out.append((template, cost))
    return out


def save_constraints(constraints, path: str | Path) -> None:
    Path(path).write_text(dumps_constraints(constraints), encoding="utf-8")


def load_constraints(path: str | Path) -> list[tuple[ConstraintTemplate, float]]:
    return loads_constraints(Path(path).read_text(encoding="utf-8"))
