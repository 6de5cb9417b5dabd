from __future__ import annotations

import numpy as np
import pytest

from relcrf.constraints import KINDS, PRECEDENCE, STATE_CHANGE, ConstraintTemplate
from relcrf.trellis import LabelAlphabet, Trellis, edge_space_size

NAMES = ("A", "B", "C", "D")


def alphabet_of(m: int) -> LabelAlphabet:
    return LabelAlphabet(NAMES[:m])


def random_trellis(rng: np.random.Generator, m: int, n: int, low: float = -5.0, high: float = 5.0) -> Trellis:
    return Trellis(alphabet_of(m), n, rng.uniform(low, high, edge_space_size(n, m)))


def random_template(rng: np.random.Generator, labels) -> ConstraintTemplate:
    kinds = [k for k in KINDS if not (k == PRECEDENCE and len(labels) == 1)]
    kind = kinds[int(rng.integers(len(kinds)))]
    while True:
        a, b, d = (labels[int(rng.integers(len(labels)))] for _ in range(3))
        if kind == PRECEDENCE and a == b:
            continue
        return ConstraintTemplate(kind, a, b, d if kind == STATE_CHANGE else None)


def random_instance(rng: np.random.Generator, max_m: int = 3, max_n: int = 4):
    """Trellis plus 1-3 random (template, cost) pairs."""
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    trellis = random_trellis(rng, m, n)
    k = int(rng.integers(1, 4))
    constraints = [
        (random_template(rng, trellis.alphabet.labels), float(rng.choice([0.5, 1.0, 2.0, rng.uniform(0, 3)])))
        for _ in range(k)
    ]
    return trellis, constraints


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
