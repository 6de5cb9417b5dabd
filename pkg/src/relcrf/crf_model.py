"""Linear-chain CRF: binary feature functions, trellis construction, partition function, perceptron training.

Transition features live on the edge between tokens ``p`` and ``p + 1``
(optionally conditioned on an attribute of token ``p + 1``); state features
live on a token.  The log weight of trellis edge ``(t, y, y')`` is the sum of
the active transition weights on that edge plus the active state weights of
token ``t + 1`` carrying ``y'``.  Start edges therefore carry the state
features of the first token and end edges carry nothing.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, DimensionError
from .trellis import LabelAlphabet, PathAssignment, Trellis, path_score, viterbi

ATTRIBUTE_KINDS = ("bias", "w", "lower", "shape", "prev", "next")
BIGRAM = "bigram"
_SEP = "|"


def token_shape(token: str) -> str:
    """Collapsed capitalisation/digit pattern, e.g. ``Smith -> Xx``, ``1999 -> d``, ``pp. -> x.``."""
    mapped = []
    for ch in token:
        if ch.isupper():
            c = "X"
        elif ch.islower():
            c = "x"
        elif ch.isdigit():
            c = "d"
        else:
            c = ch
        if not mapped or mapped[-1] != c:
            mapped.append(c)
    return "".join(mapped)


def token_attributes(tokens: Sequence[str], pos: int) -> list[str]:
    """Observation attributes of token ``pos`` that state features may test."""
    tok = tokens[pos]
    prev = tokens[pos - 1] if pos > 0 else "<BOS>"
    nxt = tokens[pos + 1] if pos + 1 < len(tokens) else "<EOS>"
    return [
        "bias",
        f"w={tok}",
        f"lower={tok.lower()}",
        f"shape={token_shape(tok)}",
        f"prev={prev}",
        f"next={nxt}",
    ]


@dataclass(frozen=True)
class FeatureTemplate:
    """A binary feature: ``state`` tests (attribute, label), ``transition`` tests (from, to[, attribute])."""

    kind: str
    label: str
    from_label: str | None = None
    attribute: str | None = None

    def __post_init__(self):
        if self.kind not in ("state", "transition"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "state" and (self.attribute is None or self.from_label is not None):
            raise ValueError("state features need an attribute and no from_label")
        if self.kind == "transition" and self.from_label is None:
            raise ValueError("transition features need a from_label")
        for name in (self.label, self.from_label):
            if name is not None and _SEP in name:
                raise ValueError(f"label {name!r} may not contain {_SEP!r}")

    @property
    def id(self) -> str:
        if self.kind == "state":
            return f"S{_SEP}{self.label}{_SEP}{self.attribute}"
        base = f"T{_SEP}{self.from_label}{_SEP}{self.label}"
        return base if self.attribute is None else f"{base}{_SEP}{self.attribute}"

    @classmethod
    def from_id(cls, fid: str) -> FeatureTemplate:
        if fid.startswith("S" + _SEP):
            parts = fid.split(_SEP, 2)
            if len(parts) == 3:
                return cls("state", parts[1], attribute=parts[2])
        elif fid.startswith("T" + _SEP):
            parts = fid.split(_SEP, 3)
            if len(parts) == 3:
                return cls("transition", parts[2], from_label=parts[1])
            if len(parts) == 4:
                return cls("transition", parts[2], from_label=parts[1], attribute=parts[3])
        raise ValueError(f"malformed feature id {fid!r}")

    def evaluate(self, tokens: Sequence[str], pos: int, from_label: str | None, to_label: str) -> int:
        """Value (0/1) on the edge entering token ``pos`` with label ``to_label``.

        ``from_label`` is the label of token ``pos - 1`` or None at the first token.
        """
        if self.kind == "state":
            return int(to_label == self.label and self.attribute in token_attributes(tokens, pos))
        if from_label is None or from_label != self.from_label or to_label != self.label:
            return 0
        return int(self.attribute is None or self.attribute in token_attributes(tokens, pos))


@dataclass(frozen=True)
class CrfModel:
    alphabet: LabelAlphabet
    features: tuple[FeatureTemplate, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        features = tuple(self.features)
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(features),):
            raise DimensionError(f"{len(features)} features but weights of shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DimensionError("model weights must be finite")
        ids = [f.id for f in features]
        if len(set(ids)) != len(ids):
            raise ValueError("feature ids must be unique")
        for f in features:
            for name in (f.label, f.from_label):
                if name is not None and name not in self.alphabet:
                    raise ValueError(f"feature {f.id!r} names unknown label {name!r}")
        w.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "weights", w)

    def with_weights(self, weights) -> CrfModel:
        return CrfModel(self.alphabet, self.features, weights)

    @cached_property
    def _tables(self):
        state = defaultdict(list)
        trans = defaultdict(list)
        for k, f in enumerate(self.features):
            y = self.alphabet.index(f.label)
            if f.kind == "state":
                state[f.attribute].append((y, k))
            else:
                trans[f.attribute].append((self.alphabet.index(f.from_label), y, k))
        return dict(state), dict(trans)

    def feature_counts(self, tokens: Sequence[str], labels: Sequence[int]) -> dict[int, int]:
        """Sparse count of every feature along one labelled sequence."""
        state, trans = self._tables
        counts: dict[int, int] = defaultdict(int)
        for pos in range(len(tokens)):
            y = labels[pos]
            prev = labels[pos - 1] if pos > 0 else None
            attrs = token_attributes(tokens, pos)
            for attr in attrs:
                for label, k in state.get(attr, ()):
                    if label == y:
                        counts[k] += 1
            if prev is None:
                continue
            for attr in [None, *attrs]:
                for a, b, k in trans.get(attr, ()):
                    if a == prev and b == y:
                        counts[k] += 1
        return counts


def build_trellis(model: CrfModel, tokens: Sequence[str]) -> Trellis:
    """Log-potential trellis of ``tokens`` under ``model``."""
    n, m = len(tokens), model.alphabet.m
    if n < 1:
        raise DimensionError("observation sequence must be non-empty")
    state_tab, trans_tab = model._tables
    w = model.weights
    state = np.zeros((n, m))
    trans = np.zeros((max(n - 1, 0), m, m))
    for pos in range(n):
        for attr in token_attributes(tokens, pos):
            for y, k in state_tab.get(attr, ()):
                state[pos, y] += w[k]
            if pos > 0:
                for a, b, k in trans_tab.get(attr, ()):
                    trans[pos - 1, a, b] += w[k]
    bigram = np.zeros((m, m))
    for a, b, k in trans_tab.get(None, ()):
        bigram[a, b] += w[k]
    trans += bigram
    trans += state[1:, None, :]
    return Trellis.from_parts(model.alphabet, state[0], trans, np.zeros(m))


def log_partition(trellis: Trellis) -> float:
    """log of the sum of exp(path score) over all paths (forward recursion)."""
    alpha = trellis.start.copy()
    for t in range(trellis.n - 1):
        alpha = logsumexp(alpha[:, None] + trellis.transitions[t], axis=0)
    return float(logsumexp(alpha + trellis.end))


def sequence_log_probability(model: CrfModel, tokens: Sequence[str], labels: Sequence[str]) -> float:
    if len(tokens) != len(labels):
        raise DimensionError(f"{len(tokens)} tokens but {len(labels)} labels")
    trellis = build_trellis(model, tokens)
    path = PathAssignment.from_names(model.alphabet, labels)
    return path_score(trellis, path) - log_partition(trellis)


def alphabet_from_corpus(corpus: Iterable[tuple[Sequence[str], Sequence[str]]], **kwargs) -> LabelAlphabet:
    seen: dict[str, None] = {}
    for _, labels in corpus:
        for label in labels:
            seen.setdefault(label, None)
    return LabelAlphabet(tuple(seen), **kwargs)


def default_features(corpus: Sequence[tuple[Sequence[str], Sequence[str]]], alphabet: LabelAlphabet) -> tuple[FeatureTemplate, ...]:
    """Label bigrams over the whole alphabet plus every (attribute, gold label) pair seen in ``corpus``."""
    features: dict[str, FeatureTemplate] = {}
    for a in alphabet.labels:
        for b in alphabet.labels:
            f = FeatureTemplate("transition", b, from_label=a)
            features[f.id] = f
    for tokens, labels in corpus:
        for pos, label in enumerate(labels):
            for attr in token_attributes(tokens, pos):
                f = FeatureTemplate("state", label, attribute=attr)
                features.setdefault(f.id, f)
    return tuple(features.values())


def train_perceptron(
    corpus: Sequence[tuple[Sequence[str], Sequence[str]]],
    epochs: int = 5,
    learning_rate: float = 1.0,
    *,
    model: CrfModel | None = None,
    average: bool = True,
) -> CrfModel:
    """Structured perceptron with weight averaging.

    Sequences are visited in corpus order every epoch, so the result is a
    pure function of the inputs.  When ``model`` is given its alphabet,
    features and weights are the starting point; otherwise all are derived
    from ``corpus`` and weights start at zero.
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    if model is None:
        alphabet = alphabet_from_corpus(corpus)
        feats = default_features(corpus, alphabet)
        model = CrfModel(alphabet, feats, np.zeros(len(feats)))
    alphabet = model.alphabet
    gold = []
    for tokens, labels in corpus:
        if len(tokens) != len(labels):
            raise DimensionError(f"{len(tokens)} tokens but {len(labels)} labels")
        gold.append((list(tokens), [alphabet.index(y) for y in labels]))

    w = np.array(model.weights, dtype=float)
    # u accumulates step-weighted updates; the average is w - u / c.
    u = np.zeros_like(w)
    c = 1
    for _ in range(epochs):
        for tokens, y_gold in gold:
            current = model.with_weights(w)
            y_pred = list(viterbi(build_trellis(current, tokens)).labels)
            if y_pred != y_gold:
                delta = defaultdict(float)
                for k, v in current.feature_counts(tokens, y_gold).items():
                    delta[k] += v
                for k, v in current.feature_counts(tokens, y_pred).items():
                    delta[k] -= v
                for k, v in delta.items():
                    if v:
                        w[k] += learning_rate * v
                        u[k] += c * learning_rate * v
            c += 1
    final = w - u / c if average else w
    return model.with_weights(final)


def decode_labels(model: CrfModel, tokens: Sequence[str]) -> list[str]:
    return viterbi(build_trellis(model, tokens)).label_sequence


def dumps_model(model: CrfModel) -> str:
    a = model.alphabet
    lines = [
        "# relcrf model",
        "\t".join(["labels", *a.labels]),
        f"start\t{a.start_label}",
        f"end\t{a.end_label}",
        "\t".join(["templates", *ATTRIBUTE_KINDS, BIGRAM]),
    ]
    for fid, weight in sorted((f.id, float(wt)) for f, wt in zip(model.features, model.weights)):
        lines.append(f"{fid}\t{weight:.17g}")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> CrfModel:
    header: dict[str, list[str]] = {}
    features, weights = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line or line.startswith("#"):
            continue
        key, *rest = line.split("\t")
        if key in ("labels", "start", "end", "templates"):
            header[key] = rest
            continue
        if len(rest) != 1:
            raise DataError("expected feature_id<TAB>weight", line=lineno)
        try:
            features.append(FeatureTemplate.from_id(key))
            weights.append(float(rest[0]))
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
    for key in ("labels", "start", "end"):
        if key not in header:
            raise DataError(f"model header lacks {key!r}")
    alphabet = LabelAlphabet(tuple(header["labels"]), header["start"][0], header["end"][0])
    return CrfModel(alphabet, tuple(features), np.array(weights))


def save_model(model: CrfModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path) -> CrfModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))

