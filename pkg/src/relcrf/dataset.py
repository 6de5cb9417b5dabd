"""Token/label corpora: loading, saving, splitting and synthetic generation."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .constraints import ConstraintTemplate, fires, holds
from .errors import DataError
from .trellis import LabelAlphabet

# Label totals of the Cora citation benchmark (350 train / 150 test citations).
CORA_TRAIN_TOKENS = 8627
CORA_TEST_TOKENS = 3474
CORA_TRAIN_SEQUENCES = 350
CORA_SEQUENCES = 500


@dataclass(frozen=True)
class Corpus:
    sequences: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()
    labels: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        seqs = tuple((tuple(t), tuple(y)) for t, y in self.sequences)
        seen: dict[str, None] = {}
        for i, (tokens, labels) in enumerate(seqs):
            if len(tokens) != len(labels):
                raise DataError(f"sequence {i}: {len(tokens)} tokens but {len(labels)} labels")
            for y in labels:
                seen.setdefault(y, None)
        labels = tuple(seen) if self.labels is None else tuple(self.labels)
        missing = set(seen) - set(labels)
        if missing:
            raise DataError(f"labels {sorted(missing)} missing from the alphabet")
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def token_count(self) -> int:
        return sum(len(t) for t, _ in self.sequences)

    @property
    def gold(self) -> list[tuple[str, ...]]:
        return [y for _, y in self.sequences]

    @property
    def tokens(self) -> list[tuple[str, ...]]:
        return [t for t, _ in self.sequences]

    def alphabet(self) -> LabelAlphabet:
        return LabelAlphabet(self.labels)


def _open_bytes(source) -> bytes:
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    data = source.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def load(source: str | Path | IO) -> Corpus:
    """Parse blank-line separated ``token<TAB>label`` sequences; alphabet in first-seen order."""
    raw = _open_bytes(source)
    sequences = []
    tokens: list[str] = []
    labels: list[str] = []
    for lineno, bline in enumerate(raw.split(b"\n"), start=1):
        try:
            line = bline.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"not valid UTF-8 ({exc.reason})", line=lineno) from None
        line = line.rstrip("\r")
        if not line.strip():
            if tokens:
                sequences.append((tokens, labels))
                tokens, labels = [], []
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"expected token<TAB>label, got {len(parts)} field(s)", line=lineno)
        token, label = parts
        if not token:
            raise DataError("empty token", line=lineno)
        if not label.strip():
            raise DataError("empty label", line=lineno)
        tokens.append(token)
        labels.append(label)
    if tokens:
        sequences.append((tokens, labels))
    return Corpus(tuple(sequences))


def dumps(corpus: Corpus) -> str:
    buf = io.StringIO()
    for tokens, labels in corpus:
        for t, y in zip(tokens, labels):
            buf.write(f"{t}\t{y}\n")
        buf.write("\n")
    return buf.getvalue()


def save(corpus: Corpus, target: str | Path | IO) -> None:
    text = dumps(corpus)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def split(corpus: Corpus, train_count: int) -> tuple[Corpus, Corpus]:
    """First ``train_count`` sequences in file order versus the rest; both keep the full alphabet."""
    if not 0 <= train_count <= len(corpus):
        raise ValueError(f"train_count {train_count} outside [0, {len(corpus)}]")
    seqs = corpus.sequences
    return Corpus(seqs[:train_count], corpus.labels), Corpus(seqs[train_count:], corpus.labels)


@dataclass(frozen=True)
class SyntheticSpec:
    labels: tuple[str, ...] = ("A", "B", "C", "D")
    min_length: int = 4
    max_length: int = 8
    planted: tuple[ConstraintTemplate, ...] = ()
    noise: float = 0.05
    seed: int = 0
    sequences: int = 100
    signal: float = 0.5
    vocabulary: int = 8
    force_antecedents: bool = True
    concentration: float = 1.0

    def __post_init__(self):
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError("need 1 <= min_length <= max_length")
        if not 0.0 <= self.noise <= 1.0 or not 0.0 <= self.signal <= 1.0:
            raise ValueError("noise and signal are probabilities")
        for t in self.planted:
            for name in t.labels:
                if name not in self.labels:
                    raise ValueError(f"planted {t.id} names unknown label {name!r}")


_MAX_TRIES = 20000
_MAX_REDRAWS = 20


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Sample a corpus whose gold labels follow ``spec.planted`` up to the noise rate.

    Labels come from a random first-order Markov chain whose rows are
    Dirichlet(``concentration``) draws.  For every sequence
    each planted template must fire (or, without ``force_antecedents``,
    fires as it did in an unconstrained draw) and is independently broken
    with probability ``noise``; label sequences are redrawn until that
    pattern is met.  Each token is drawn from its label's private
    vocabulary with probability ``signal`` and from a shared vocabulary
    otherwise.
    """
    rng = np.random.default_rng(spec.seed)
    labels = list(spec.labels)
    m = len(labels)
    init = rng.dirichlet(np.full(m, spec.concentration))
    chain = rng.dirichlet(np.full(m, spec.concentration), size=m)
    own = {y: [f"{y.lower()}{k}" for k in range(spec.vocabulary)] for y in labels}
    shared = [f"w{k}" for k in range(spec.vocabulary)]

    def draw_labels(n: int) -> list[str]:
        ys = [int(rng.choice(m, p=init))]
        for _ in range(n - 1):
            ys.append(int(rng.choice(m, p=chain[ys[-1]])))
        return [labels[i] for i in ys]

    sequences = []
    for _ in range(spec.sequences):
        n = int(rng.integers(spec.min_length, spec.max_length + 1))
        seq = None
        for _ in range(_MAX_REDRAWS):
            if seq is not None:
                break
            if spec.force_antecedents:
                fire = [True] * len(spec.planted)
            else:
                skeleton = draw_labels(n)
                fire = [fires(t, skeleton) for t in spec.planted]
            broken = [f and rng.random() < spec.noise for f in fire]
            for _ in range(_MAX_TRIES):
                cand = draw_labels(n)
                if all(
                    fires(t, cand) == f and (not holds(t, cand)) == v
                    for t, f, v in zip(spec.planted, fire, broken)
                ):
                    seq = cand
                    break
        if seq is None:
            raise ValueError(f"could not sample a length-{n} sequence matching the planted templates")
        tokens = [
            own[y][int(rng.integers(spec.vocabulary))] if rng.random() < spec.signal
            else shared[int(rng.integers(spec.vocabulary))]
            for y in seq
        ]
        sequences.append((tokens, seq))
    return Corpus(tuple(sequences), tuple(labels))


def load_synthetic_spec(path: str | Path) -> SyntheticSpec:
    """Read a flat ``key=value`` file; ``labels`` comma separated, ``planted`` as ``kind:A:B[:D]`` joined by ``;``."""
    kwargs: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError("expected key=value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "labels":
                kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "planted":
                kwargs[key] = tuple(ConstraintTemplate(*p.split(":")) for p in value.split(";") if p.strip())
            elif key in ("min_length", "max_length", "seed", "sequences", "vocabulary"):
                kwargs[key] = int(value)
            elif key in ("noise", "signal", "concentration"):
                kwargs[key] = float(value)
            elif key == "force_antecedents":
                kwargs[key] = value.lower() in ("1", "true", "yes")
            else:
                raise ValueError(f"unknown key {key!r}")
        except (TypeError, ValueError) as exc:
            raise DataError(str(exc), line=lineno) from None
    return SyntheticSpec(**kwargs)


def governed_positions(template: ConstraintTemplate, gold: Sequence[str]) -> set[int]:
    """Token positions (0-based) a template speaks about: tokens carrying one of its labels, plus both ends for begin_end."""
    named = set(template.labels)
    out = {i for i, y in enumerate(gold) if y in named}
    if template.kind == "begin_end":
        out |= {0, len(gold) - 1}
    return out
