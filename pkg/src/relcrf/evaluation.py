"""Token-level precision, recall, F-measure and accuracy."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import DimensionError


@dataclass(frozen=True)
class LabelScores:
    precision: float
    recall: float
    f_measure: float
    predicted_count: int
    gold_count: int
    correct_count: int


@dataclass(frozen=True)
class Averages:
    precision: float
    recall: float
    f_measure: float


@dataclass(frozen=True)
class EvaluationReport:
    per_label: dict[str, LabelScores]
    macro: Averages
    micro: Averages
    accuracy: float
    total_tokens: int


def f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def evaluate(gold: Sequence[Sequence[str]], predicted: Sequence[Sequence[str]]) -> EvaluationReport:
    """Per-label and averaged scores; macro averages run over labels present in the gold data."""
    if len(gold) != len(predicted):
        raise DimensionError(f"{len(gold)} gold sequences but {len(predicted)} predicted")
    gold_n, pred_n, correct = Counter(), Counter(), Counter()
    total = 0
    for i, (g_seq, p_seq) in enumerate(zip(gold, predicted)):
        if len(g_seq) != len(p_seq):
            raise DimensionError(f"sequence {i}: {len(g_seq)} gold labels but {len(p_seq)} predicted")
        for g, p in zip(g_seq, p_seq):
            gold_n[g] += 1
            pred_n[p] += 1
            correct[g] += g == p
            total += 1

    per_label = {}
    for label in sorted(set(gold_n) | set(pred_n)):
        p = _ratio(correct[label], pred_n[label])
        r = _ratio(correct[label], gold_n[label])
        per_label[label] = LabelScores(p, r, f_measure(p, r), pred_n[label], gold_n[label], correct[label])

    in_gold = [per_label[y] for y in per_label if gold_n[y]]
    if in_gold:
        k = len(in_gold)
        macro = Averages(
            sum(s.precision for s in in_gold) / k,
            sum(s.recall for s in in_gold) / k,
            sum(s.f_measure for s in in_gold) / k,
        )
    else:
        macro = Averages(0.0, 0.0, 0.0)
    n_correct = sum(correct.values())
    micro_p = _ratio(n_correct, sum(pred_n.values()))
    micro_r = _ratio(n_correct, sum(gold_n.values()))
    micro = Averages(micro_p, micro_r, f_measure(micro_p, micro_r))
    return EvaluationReport(per_label, macro, micro, _ratio(n_correct, total), total)


def format_report(report: EvaluationReport, title: str | None = None) -> str:
    """Human-readable table (2 decimals, percentages) followed by a full-precision key=value block."""
    lines = []
    if title:
        lines.append(f"== {title} ==")
    lines.append(f"{'label':<16}{'P':>8}{'R':>8}{'F':>8}{'pred':>7}{'gold':>7}{'ok':>7}")
    for label, s in report.per_label.items():
        lines.append(
            f"{label:<16}{100 * s.precision:8.2f}{100 * s.recall:8.2f}{100 * s.f_measure:8.2f}"
            f"{s.predicted_count:7d}{s.gold_count:7d}{s.correct_count:7d}"
        )
    for name, avg in (("macro", report.macro), ("micro", report.micro)):
        lines.append(f"{name:<16}{100 * avg.precision:8.2f}{100 * avg.recall:8.2f}{100 * avg.f_measure:8.2f}")
    lines.append(f"{'accuracy':<16}{100 * report.accuracy:8.2f}")
    lines.append("")
    lines.extend(f"{k}={v}" for k, v in report_items(report))
    return "\n".join(lines) + "\n"


def report_items(report: EvaluationReport) -> list[tuple[str, str]]:
    items = [("tokens", str(report.total_tokens)), ("accuracy", repr(report.accuracy))]
    for name, avg in (("macro", report.macro), ("micro", report.micro)):
        items += [
            (f"{name}.precision", repr(avg.precision)),
            (f"{name}.recall", repr(avg.recall)),
            (f"{name}.f_measure", repr(avg.f_measure)),
        ]
    for label, s in report.per_label.items():
        items += [
            (f"label.{label}.precision", repr(s.precision)),
            (f"label.{label}.recall", repr(s.recall)),
            (f"label.{label}.f_measure", repr(s.f_measure)),
            (f"label.{label}.predicted", str(s.predicted_count)),
            (f"label.{label}.gold", str(s.gold_count)),
            (f"label.{label}.correct", str(s.correct_count)),
        ]
    return items


def parse_report_block(text: str) -> dict[str, str]:
    """Read back the key=value block of :func:`format_report`."""
    out = {}
    for line in text.splitlines():
        if "=" in line and not line.startswith("=="):
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
