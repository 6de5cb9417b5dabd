"""Per-sequence decoding with the three decoders, and side-by-side comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .constrained_ilp import ConstrainedProblem, solve_min_violation
from .constraints import ConstraintSystem, ConstraintTemplate
from .crf_model import CrfModel, build_trellis
from .dataset import Corpus, governed_positions
from .errors import InfeasibleError
from .evaluation import EvaluationReport, evaluate
from .lagrangian import DualResult, solve_dual
from .trellis import DEFAULT_ENUMERATION_CAP, viterbi

VITERBI = "viterbi"
EXACT = "exact_constrained"
LAGRANGIAN = "lagrangian"
DECODERS = (VITERBI, EXACT, LAGRANGIAN)


@dataclass(frozen=True)
class DecoderSettings:
    decoder: str = VITERBI
    tau: float = 0.9
    max_iterations: int = 200
    tolerance: float = 1e-6
    cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}; choose from {', '.join(DECODERS)}")


@dataclass(frozen=True)
class Decoded:
    labels: list[str]
    status: str = "ok"
    dual: DualResult | None = field(default=None, repr=False)


def decode(
    model: CrfModel,
    tokens: Sequence[str],
    settings: DecoderSettings = DecoderSettings(),
    constraints: Sequence[tuple[ConstraintTemplate, float]] = (),
) -> Decoded:
    """Label one sequence.

    The exact decoder falls back to the Viterbi labels when the score floor
    cannot be met and reports status ``infeasible``.
    """
    trellis = build_trellis(model, tokens)
    if settings.decoder == VITERBI:
        return Decoded(viterbi(trellis).label_sequence)
    system = ConstraintSystem.build(model.alphabet, len(tokens), constraints)
    if settings.decoder == EXACT:
        problem = ConstrainedProblem.create(trellis, system, settings.tau)
        try:
            sol = solve_min_violation(problem, cap=settings.cap)
        except InfeasibleError:
            return Decoded(viterbi(trellis).label_sequence, status="infeasible")
        return Decoded(sol.path.label_sequence)
    result = solve_dual(trellis, system, settings.max_iterations, settings.tolerance)
    return Decoded(result.path.label_sequence, status=result.status, dual=result)


@dataclass(frozen=True)
class Comparison:
    predictions: dict[str, list[list[str]]]
    reports: dict[str, EvaluationReport]
    traces: list[DualResult] = field(repr=False)


def compare(
    model: CrfModel,
    corpus: Corpus,
    constraints: Sequence[tuple[ConstraintTemplate, float]],
    settings: DecoderSettings = DecoderSettings(),
) -> Comparison:
    """Decode ``corpus`` with every decoder under the same settings."""
    predictions: dict[str, list[list[str]]] = {}
    traces: list[DualResult] = []
    for name in DECODERS:
        chosen = DecoderSettings(name, settings.tau, settings.max_iterations, settings.tolerance, settings.cap)
        out = []
        for tokens in corpus.tokens:
            dec = decode(model, tokens, chosen, constraints)
            out.append(dec.labels)
            if dec.dual is not None:
                traces.append(dec.dual)
        predictions[name] = out
    reports = {name: evaluate(corpus.gold, preds) for name, preds in predictions.items()}
    return Comparison(predictions, reports, traces)


def governed_accuracy(
    gold: Sequence[Sequence[str]],
    predicted: Sequence[Sequence[str]],
    templates: Sequence[ConstraintTemplate],
) -> tuple[int, int]:
    """(correct, total) over the tokens any of ``templates`` speaks about."""
    correct = total = 0
    for g, p in zip(gold, predicted):
        positions = set()
        for t in templates:
            positions |= governed_positions(t, g)
        total += len(positions)
        correct += sum(g[i] == p[i] for i in positions)
    return correct, total
