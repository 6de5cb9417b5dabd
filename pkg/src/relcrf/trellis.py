"""Label alphabet, edge-index space, trellis weights, paths and Viterbi decoding.

A sequence of length ``n`` over ``m`` labels is laid out as a layered graph
with a synthetic start node before the first token and a synthetic end node
after the last one.  Edges are flattened into a vector of size
``(n - 1) * m**2 + 2 * m``: first the ``m`` start edges (t = 0), then the
``m**2`` label-to-label edges of each step t = 1..n-1, then the ``m`` end
edges (t = n).  Inside one step the order is by source label, then target
label.

All weights are log potentials.  A path scores the sum of its ``n + 1``
edge weights.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, DimensionError, EdgeIndexError, EnumerationCapError

DEFAULT_START = "<START>"
DEFAULT_END = "<END>"
DEFAULT_ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class LabelAlphabet:
    labels: tuple[str, ...]
    start_label: str = DEFAULT_START
    end_label: str = DEFAULT_END

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 1:
            raise ValueError("alphabet needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels in {self.labels!r}")
        if self.start_label == self.end_label:
            raise ValueError("start and end labels must differ")
        for special in (self.start_label, self.end_label):
            if special in self.labels:
                raise ValueError(f"synthetic label {special!r} collides with a real label")

    @property
    def m(self) -> int:
        return len(self.labels)

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._positions[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in alphabet") from None

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._positions


def edge_space_size(n: int, m: int) -> int:
    return (n - 1) * m * m + 2 * m


def edge_index(t: int, from_label: str, to_label: str, n: int, alphabet: LabelAlphabet) -> int:
    """Flat position of the edge ``from_label -> to_label`` at step ``t``.

    Raises :class:`EdgeIndexError` naming the offending component when the
    triple does not describe an edge of a length-``n`` trellis.
    """
    if n < 1:
        raise EdgeIndexError(f"sequence length must be >= 1, got {n}")
    if not 0 <= t <= n:
        raise EdgeIndexError(f"time step t={t} outside [0, {n}]")
    m = alphabet.m
    if t == 0:
        if from_label != alphabet.start_label:
            raise EdgeIndexError(f"from_label {from_label!r} at t=0 must be {alphabet.start_label!r}")
        return _real_index(alphabet, to_label, "to_label", t)
    src = _real_index(alphabet, from_label, "from_label", t)
    if t == n:
        if to_label != alphabet.end_label:
            raise EdgeIndexError(f"to_label {to_label!r} at t=n={n} must be {alphabet.end_label!r}")
        return m + (n - 1) * m * m + src
    dst = _real_index(alphabet, to_label, "to_label", t)
    return m + (t - 1) * m * m + src * m + dst


def _real_index(alphabet: LabelAlphabet, label: str, role: str, t: int) -> int:
    if label not in alphabet:
        raise EdgeIndexError(f"{role} {label!r} at t={t} is not a real label")
    return alphabet.index(label)


def edge_triple(index: int, n: int, alphabet: LabelAlphabet) -> tuple[int, str, str]:
    """Inverse of :func:`edge_index`."""
    m = alphabet.m
    size = edge_space_size(n, m)
    if not 0 <= index < size:
        raise EdgeIndexError(f"edge index {index} outside [0, {size})")
    names = alphabet.labels
    if index < m:
        return 0, alphabet.start_label, names[index]
    rest = index - m
    if rest < (n - 1) * m * m:
        step, cell = divmod(rest, m * m)
        src, dst = divmod(cell, m)
        return step + 1, names[src], names[dst]
    return n, names[rest - (n - 1) * m * m], alphabet.end_label


def _flat_index(t: int, src: int, dst: int, n: int, m: int) -> int:
    # Integer-label variant of edge_index with no validation; src/dst ignored
    # where the endpoint is synthetic.
    if t == 0:
        return dst
    if t == n:
        return m + (n - 1) * m * m + src
    return m + (t - 1) * m * m + src * m + dst


@dataclass(frozen=True)
class Trellis:
    alphabet: LabelAlphabet
    n: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"sequence length must be >= 1, got {self.n}")
        w = np.array(self.weights, dtype=float)
        expected = edge_space_size(self.n, self.alphabet.m)
        if w.shape != (expected,):
            raise DimensionError(f"expected {expected} weights for n={self.n}, m={self.alphabet.m}, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DimensionError("trellis weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_parts(cls, alphabet: LabelAlphabet, start, transitions, end) -> Trellis:
        """Assemble from start (m,), transitions (n-1, m, m) and end (m,) arrays."""
        m = alphabet.m
        start = np.asarray(start, dtype=float).reshape(m)
        transitions = np.asarray(transitions, dtype=float).reshape(-1, m, m)
        end = np.asarray(end, dtype=float).reshape(m)
        n = transitions.shape[0] + 1
        return cls(alphabet, n, np.concatenate([start, transitions.ravel(), end]))

    @property
    def m(self) -> int:
        return self.alphabet.m

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.weights[: self.m]

    @property
    def transitions(self) -> np.ndarray:
        m = self.m
        return self.weights[m : m + (self.n - 1) * m * m].reshape(self.n - 1, m, m)

    @property
    def end(self) -> np.ndarray:
        return self.weights[self.size - self.m :]

    def with_weights(self, weights) -> Trellis:
        return Trellis(self.alphabet, self.n, weights)


@dataclass(frozen=True)
class PathAssignment:
    """One start-to-end path, stored as the label index at each token."""

    alphabet: LabelAlphabet
    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(i) for i in self.labels)
        if not labels:
            raise DimensionError("a path covers at least one token")
        if any(not 0 <= i < self.alphabet.m for i in labels):
            raise DimensionError(f"label indices {labels} outside [0, {self.alphabet.m})")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_names(cls, alphabet: LabelAlphabet, names: Sequence[str]) -> PathAssignment:
        return cls(alphabet, tuple(alphabet.index(name) for name in names))

    @classmethod
    def from_edges(cls, alphabet: LabelAlphabet, n: int, e) -> PathAssignment:
        """Recover the path from a 0/1 edge-indicator vector, checking flow conservation."""
        e = np.asarray(e)
        m = alphabet.m
        if e.shape != (edge_space_size(n, m),):
            raise DimensionError(f"edge vector of shape {e.shape} does not fit n={n}, m={m}")
        if not np.all((e == 0) | (e == 1)):
            raise DimensionError("edge vector must be binary")
        if int(e.sum()) != n + 1:
            raise DimensionError(f"a path selects exactly {n + 1} edges, got {int(e.sum())}")
        start = e[:m]
        trans = e[m : m + (n - 1) * m * m].reshape(n - 1, m, m)
        end = e[m + (n - 1) * m * m :]
        if start.sum() != 1 or end.sum() != 1:
            raise DimensionError("exactly one start edge and one end edge required")
        inflow = [start]
        outflow = [trans[t].sum(axis=1) for t in range(n - 1)] + [end]
        inflow += [trans[t].sum(axis=0) for t in range(n - 1)]
        for pos in range(n):
            if not np.array_equal(inflow[pos], outflow[pos]):
                raise DimensionError(f"flow conservation broken at token {pos + 1}")
        return cls(alphabet, tuple(int(np.argmax(inflow[pos])) for pos in range(n)))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def label_sequence(self) -> list[str]:
        return [self.alphabet.labels[i] for i in self.labels]

    def edge_indices(self) -> list[int]:
        """Flat indices of the ``n + 1`` selected edges, by ascending time."""
        n, m, ys = self.n, self.alphabet.m, self.labels
        out = [ys[0]]
        out.extend(m + (t - 1) * m * m + ys[t - 1] * m + ys[t] for t in range(1, n))
        out.append(m + (n - 1) * m * m + ys[-1])
        return out

    @property
    def e(self) -> np.ndarray:
        vec = np.zeros(edge_space_size(self.n, self.alphabet.m), dtype=np.int64)
        vec[self.edge_indices()] = 1
        return vec


def _check_fits(trellis: Trellis, path: PathAssignment) -> None:
    if path.n != trellis.n or path.alphabet.m != trellis.m:
        raise DimensionError(f"path (n={path.n}, m={path.alphabet.m}) does not fit trellis (n={trellis.n}, m={trellis.m})")


def path_score(trellis: Trellis, path: PathAssignment) -> float:
    """Sum of the path's edge weights, i.e. ``M . e``.

    Accumulated left to right so that equal-scoring paths compare equal
    bit for bit with the Viterbi recursion.
    """
    _check_fits(trellis, path)
    w = trellis.weights
    total = 0.0
    for idx in path.edge_indices():
        total += float(w[idx])
    return total


def viterbi(trellis: Trellis) -> PathAssignment:
    """Highest-scoring path.

    Ties go to the lowest label index at the latest position where two
    optimal paths differ; ``argmax`` returning the first maximum gives
    exactly that during the backtrace.
    """
    m = trellis.m
    trans = trellis.transitions
    score = trellis.start.copy()
    cols = np.arange(m)
    back = []
    for t in range(trellis.n - 1):
        cand = score[:, None] + trans[t]
        bp = np.argmax(cand, axis=0)
        score = cand[bp, cols]
        back.append(bp)
    final = score + trellis.end
    cursor = int(np.argmax(final))
    labels = [cursor]
    for bp in reversed(back):
        cursor = int(bp[cursor])
        labels.append(cursor)
    labels.reverse()
    return PathAssignment(trellis.alphabet, tuple(labels))


def all_label_sequences(m: int, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Every label sequence as rows of an (m**n, n) integer array, lexicographic order."""
    if m**n > cap:
        raise EnumerationCapError(m, n, cap)
    grids = np.indices((m,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grids)


def score_all_paths(trellis: Trellis, cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force scores of all m**n paths, summed in the same order as :func:`path_score`."""
    seqs = all_label_sequences(trellis.m, trellis.n, cap)
    scores = trellis.start[seqs[:, 0]].copy()
    trans = trellis.transitions
    for t in range(trellis.n - 1):
        scores += trans[t][seqs[:, t], seqs[:, t + 1]]
    scores += trellis.end[seqs[:, -1]]
    return seqs, scores


def enumerate_paths(trellis: Trellis, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[PathAssignment]:
    """Yield every path exactly once; refuses when m**n exceeds ``cap``."""
    m, n = trellis.m, trellis.n
    if m**n > cap:
        raise EnumerationCapError(m, n, cap)
    for labels in itertools.product(range(m), repeat=n):
        yield PathAssignment(trellis.alphabet, labels)


def canonical_key(labels: Sequence[int]) -> tuple[int, ...]:
    """Sort key realising the tie-break: compare from the last token backwards."""
    return tuple(reversed(labels))


def dumps_trellis(trellis: Trellis) -> str:
    lines = [f"n={trellis.n} m={trellis.m}"]
    for idx, weight in enumerate(trellis.weights):
        t, src, dst = edge_triple(idx, trellis.n, trellis.alphabet)
        lines.append(f"{t}\t{src}\t{dst}\t{float(weight):.17g}")
    return "\n".join(lines) + "\n"


def loads_trellis(text: str) -> Trellis:
    """Parse the text produced by :func:`dumps_trellis`; the alphabet is read off the t=0 and t=n lines."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError("empty trellis text")
    try:
        header = dict(part.split("=", 1) for part in lines[0].split())
        n, m = int(header["n"]), int(header["m"])
    except (ValueError, KeyError):
        raise DataError(f"bad trellis header {lines[0]!r}", line=1) from None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"expected 4 tab-separated fields, got {len(parts)}", line=lineno)
        try:
            rows.append((int(parts[0]), parts[1], parts[2], float(parts[3])))
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
    if len(rows) != edge_space_size(n, m):
        raise DataError(f"expected {edge_space_size(n, m)} edge lines, got {len(rows)}")
    alphabet = LabelAlphabet(
        tuple(r[2] for r in rows[:m]), start_label=rows[0][1], end_label=rows[-1][2]
    )
    weights = np.full(len(rows), np.nan)
    for t, src, dst, weight in rows:
        weights[edge_index(t, src, dst, n, alphabet)] = weight
    return Trellis(alphabet, n, weights)
