"""``relcrf`` command line: train, mine, decode, evaluate, compare (plus synth).

Exit codes: 0 success, 2 usage error, 3 data error, 4 infeasible instance.
Failures print a single ``error=<Class> message=<text>`` line on stderr and
remove any output written by the failing run.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from . import dataset
from .constraints import dumps_constraints, load_constraints, mine
from .crf_model import dumps_model, load_model, train_perceptron
from .decoding import DECODERS, EXACT, LAGRANGIAN, VITERBI, DecoderSettings, compare, decode
from .errors import DataError, RelCrfError
from .evaluation import evaluate, format_report
from .lagrangian import NO_FEASIBLE, TRACE_HEADER

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

COMMANDS = ("train", "mine", "decode", "evaluate", "compare", "synth")


class UsageError(RelCrfError):
    pass


class InfeasibleInstance(RelCrfError):
    pass


@dataclass
class RunConfig:
    command: str
    model_path: str | None = None
    corpus_path: str | None = None
    constraints_path: str | None = None
    decoder: str = VITERBI
    tau: float = 0.9
    max_iterations: int = 200
    tolerance: float = 1e-6
    seed: int | None = None
    output_path: str | None = None
    predictions_path: str | None = None
    trace_path: str | None = None
    synth_spec_path: str | None = None
    epochs: int = 5
    learning_rate: float = 1.0
    min_support: int = 1
    max_violation_rate: float = 0.0
    separators: str = ""
    strict: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.decoder not in DECODERS:
            raise UsageError(f"unknown decoder {self.decoder!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise UsageError("tau must lie in [0, 1]")
        if self.max_iterations < 1:
            raise UsageError("max-iterations must be >= 1")
        if self.tolerance < 0:
            raise UsageError("tolerance must be >= 0")
        if self.epochs < 0 or self.min_support < 0:
            raise UsageError("epochs and min-support must be >= 0")
        if not 0.0 <= self.max_violation_rate <= 1.0:
            raise UsageError("max-violation-rate must lie in [0, 1]")
        needs = {
            "train": ("corpus_path", "model_path"),
            "mine": ("corpus_path", "constraints_path"),
            "decode": ("model_path", "corpus_path", "output_path"),
            "evaluate": ("corpus_path", "predictions_path"),
            "compare": ("model_path", "corpus_path", "constraints_path", "output_path"),
            "synth": ("synth_spec_path", "output_path"),
        }[self.command]
        missing = [n for n in needs if getattr(self, n) is None]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise UsageError(f"{self.command} needs {flags}")
        if self.command == "decode" and self.decoder != VITERBI and self.constraints_path is None:
            raise UsageError(f"decoder {self.decoder} needs --constraints-path")


class _Outputs:
    """Atomic file writes; everything committed so far is removed by :meth:`rollback`."""

    def __init__(self):
        self.committed: list[Path] = []

    def write(self, path: str | Path, text: str) -> None:
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.committed.append(path)

    def rollback(self) -> None:
        for path in self.committed:
            path.unlink(missing_ok=True)
        self.committed.clear()


def _load_corpus(path: str) -> dataset.Corpus:
    try:
        return dataset.load(path)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _load_constraints(path: str | None):
    return [] if path is None else load_constraints(path)


def _settings(cfg: RunConfig, decoder: str | None = None) -> DecoderSettings:
    return DecoderSettings(decoder or cfg.decoder, cfg.tau, cfg.max_iterations, cfg.tolerance)


def _cmd_train(cfg: RunConfig, out: _Outputs, log) -> int:
    corpus = _load_corpus(cfg.corpus_path)
    if not len(corpus):
        raise DataError(f"{cfg.corpus_path}: no sequences")
    model = train_perceptron(list(corpus), epochs=cfg.epochs, learning_rate=cfg.learning_rate)
    out.write(cfg.model_path, dumps_model(model))
    print(f"trained labels={model.alphabet.m} features={len(model.features)} sequences={len(corpus)}", file=log)
    return EXIT_OK


def _cmd_mine(cfg: RunConfig, out: _Outputs, log) -> int:
    corpus = _load_corpus(cfg.corpus_path)
    separators = tuple(s for s in cfg.separators.split(",") if s)
    found = mine(
        corpus.gold, cfg.min_support, cfg.max_violation_rate, labels=corpus.labels, separators=separators
    )
    out.write(cfg.constraints_path, dumps_constraints((c.template, c.cost) for c in found))
    print(f"mined constraints={len(found)}", file=log)
    return EXIT_OK


def _check_labels(model, constraints) -> None:
    for template, _ in constraints:
        for name in template.labels:
            if name not in model.alphabet:
                raise DataError(f"constraint {template.id} names label {name!r} unknown to the model")


def _cmd_decode(cfg: RunConfig, out: _Outputs, log) -> int:
    model = load_model(cfg.model_path)
    corpus = _load_corpus(cfg.corpus_path)
    constraints = _load_constraints(cfg.constraints_path)
    _check_labels(model, constraints)
    settings = _settings(cfg)
    buf = io.StringIO()
    infeasible = 0
    for i, tokens in enumerate(corpus.tokens):
        dec = decode(model, tokens, settings, constraints)
        if dec.status in ("infeasible", NO_FEASIBLE):
            infeasible += 1
            print(f"warning={dec.status} sequence={i} decoder={settings.decoder}", file=sys.stderr)
            if cfg.strict:
                raise InfeasibleInstance(f"sequence {i}: {settings.decoder} found no labelling meeting the constraints")
        for t, y in zip(tokens, dec.labels):
            buf.write(f"{t}\t{y}\n")
        buf.write("\n")
    out.write(cfg.output_path, buf.getvalue())
    print(f"decoded sequences={len(corpus)} decoder={settings.decoder} infeasible={infeasible}", file=log)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def _cmd_evaluate(cfg: RunConfig, out: _Outputs, log) -> int:
    gold = _load_corpus(cfg.corpus_path)
    pred = _load_corpus(cfg.predictions_path)
    if len(gold) != len(pred):
        raise DataError(f"{len(gold)} gold sequences but {len(pred)} predicted")
    for i, ((gt, _), (pt, _)) in enumerate(zip(gold, pred)):
        if gt != pt:
            raise DataError(f"sequence {i}: tokens differ between gold and predictions")
    text = format_report(evaluate(gold.gold, pred.gold), title="evaluation")
    if cfg.output_path is None:
        log.write(text)
    else:
        out.write(cfg.output_path, text)
    return EXIT_OK


_TITLES = {VITERBI: "Viterbi", EXACT: "Constraints (exact)", LAGRANGIAN: "Lagrangian relaxation"}


def _side_by_side(reports) -> str:
    lines = [f"{'decoder':<24}{'accuracy':>10}{'macro F':>10}{'micro F':>10}"]
    for name, r in reports.items():
        lines.append(f"{_TITLES[name]:<24}{100 * r.accuracy:10.2f}{100 * r.macro.f_measure:10.2f}{100 * r.micro.f_measure:10.2f}")
    return "\n".join(lines) + "\n"


def _cmd_compare(cfg: RunConfig, out: _Outputs, log) -> int:
    model = load_model(cfg.model_path)
    corpus = _load_corpus(cfg.corpus_path)
    constraints = _load_constraints(cfg.constraints_path)
    _check_labels(model, constraints)
    cmp = compare(model, corpus, constraints, _settings(cfg))
    parts = [_side_by_side(cmp.reports)]
    for name, report in cmp.reports.items():
        parts.append("\n" + format_report(report, title=name))
    no_feasible = [i for i, r in enumerate(cmp.traces) if r.status == NO_FEASIBLE]
    for i in no_feasible:
        print(f"warning={NO_FEASIBLE} sequence={i} decoder={LAGRANGIAN}", file=sys.stderr)
    if no_feasible and cfg.strict:
        raise InfeasibleInstance(f"sequence {no_feasible[0]}: {LAGRANGIAN} found no labelling meeting the constraints")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("sequence", *TRACE_HEADER))
    for i, result in enumerate(cmp.traces):
        for row in result.trace:
            writer.writerow(
                [i, row.k, f"{row.dual:.17g}", f"{row.gnorm:.17g}", str(row.feasible).lower(), f"{row.theta:.17g}"]
            )
    out.write(cfg.output_path, "".join(parts))
    out.write(cfg.trace_path or f"{cfg.output_path}.trace.csv", buf.getvalue())
    log.write(parts[0])
    return EXIT_INFEASIBLE if no_feasible else EXIT_OK


def _cmd_synth(cfg: RunConfig, out: _Outputs, log) -> int:
    try:
        spec = dataset.load_synthetic_spec(cfg.synth_spec_path)
    except DataError as exc:
        raise DataError(f"{cfg.synth_spec_path}: {exc}") from None
    if cfg.seed is not None:
        spec = dataset.SyntheticSpec(**{**spec.__dict__, "seed": cfg.seed})
    try:
        corpus = dataset.generate_synthetic(spec)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out.write(cfg.output_path, dataset.dumps(corpus))
    print(f"generated sequences={len(corpus)} tokens={corpus.token_count}", file=log)
    return EXIT_OK


_HANDLERS = {
    "train": _cmd_train,
    "mine": _cmd_mine,
    "decode": _cmd_decode,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "synth": _cmd_synth,
}


def _report_error(exc: BaseException) -> None:
    message = " ".join(str(exc).split())
    print(f"error={type(exc).__name__} message={message}", file=sys.stderr)


def run(config: RunConfig, log=None) -> int:
    """Execute one command; returns the exit status."""
    log = sys.stdout if log is None else log
    out = _Outputs()
    try:
        config.validate()
        return _HANDLERS[config.command](config, out, log)
    except UsageError as exc:
        out.rollback()
        _report_error(exc)
        return EXIT_USAGE
    except InfeasibleInstance as exc:
        out.rollback()
        _report_error(exc)
        return EXIT_INFEASIBLE
    except (DataError, OSError, ValueError, UnicodeDecodeError) as exc:
        out.rollback()
        _report_error(exc)
        return EXIT_DATA
    except BaseException:
        out.rollback()
        raise


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}: expected key=value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_TYPES or key == "command":
            raise UsageError(f"{path}: unknown setting {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value: str):
    kind = _CONFIG_TYPES[key]
    try:
        if kind == "bool":
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("1", "true", "yes")
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--model-path")
    common.add_argument("--corpus-path")
    common.add_argument("--constraints-path")
    common.add_argument("--decoder", choices=DECODERS)
    common.add_argument("--tau", type=float, help="score floor fraction for the exact decoder")
    common.add_argument("--max-iterations", type=int, help="subgradient iteration budget K")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--output-path")
    common.add_argument("--predictions-path", help="predicted labels to score (evaluate)")
    common.add_argument("--trace-path", help="Lagrangian trace CSV (compare); default OUTPUT.trace.csv")
    common.add_argument("--synth-spec-path", help="synthetic corpus description (synth)")
    common.add_argument("--epochs", type=int)
    common.add_argument("--learning-rate", type=float)
    common.add_argument("--min-support", type=int)
    common.add_argument("--max-violation-rate", type=float)
    common.add_argument("--separators", help="comma separated labels treated as separators when mining")
    common.add_argument("--strict", action="store_true", default=None, help="stop at the first infeasible sequence")

    parser = _Parser(prog="relcrf", description="Linear-chain CRF tagging with constrained decoding.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "train": "train a perceptron CRF from a labelled corpus",
        "mine": "mine constraints with violation costs from gold labels",
        "decode": "label a corpus with one decoder",
        "evaluate": "score predicted labels against gold labels",
        "compare": "run all decoders on one test corpus and report side by side",
        "synth": "sample a synthetic planted-constraint corpus",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_config(argv: Sequence[str]) -> RunConfig:
    args = vars(build_parser().parse_args(list(argv)))
    config_path = args.pop("config")
    settings: dict = {}
    if config_path is not None:
        settings.update({k: _coerce(k, v) for k, v in _read_config_file(config_path).items()})
    settings.update({k: v for k, v in args.items() if v is not None})
    return RunConfig(**settings)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except UsageError as exc:
        _report_error(exc)
        return EXIT_USAGE
    except DataError as exc:
        _report_error(exc)
        return EXIT_DATA
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
