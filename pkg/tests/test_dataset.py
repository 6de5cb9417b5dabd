from __future__ import annotations

import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relcrf.constraints import BEGIN_END, PRESENCE_PRECEDENCE, ConstraintTemplate, fires, holds
from relcrf.dataset import (
    Corpus,
    SyntheticSpec,
    dumps,
    generate_synthetic,
    governed_positions,
    load,
    load_synthetic_spec,
    save,
    split,
)
from relcrf.errors import DataError


def test_load_basic():
    text = "The\tA\ncat\tB\n\n\nsat\tC\n"
    c = load(io.StringIO(text))
    assert c.tokens == [("The", "cat"), ("sat",)]
    assert c.labels == ("A", "B", "C")
    assert c.token_count == 3


def test_empty_input():
    c = load(io.BytesIO(b""))
    assert len(c) == 0 and c.labels == ()


@pytest.mark.parametrize(
    "raw, line",
    [
        (b"a\tA\nb A\n", 2),
        (b"a\tA\n\n\tB\n", 3),
        (b"a\t \n", 1),
        (b"a\tA\nb\tB\tC\n", 2),
        (b"a\tA\n\xff\tB\n", 2),
    ],
)
def test_load_errors_carry_line_numbers(raw, line):
    with pytest.raises(DataError) as info:
        load(io.BytesIO(raw))
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


token = st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zs", "Zl", "Zp")), min_size=1, max_size=5)
label = st.sampled_from(["A", "B", "TITLE", "x-y"])


@given(st.lists(st.lists(st.tuples(token, label), min_size=1, max_size=6), max_size=6))
def test_round_trip(seqs):
    corpus = Corpus(tuple((tuple(t for t, _ in s), tuple(y for _, y in s)) for s in seqs))
    buf = io.StringIO()
    save(corpus, buf)
    assert load(io.StringIO(buf.getvalue())) == corpus


def test_file_round_trip(tmp_path):
    corpus = generate_synthetic(SyntheticSpec(sequences=5))
    save(corpus, tmp_path / "c.txt")
    assert load(tmp_path / "c.txt").sequences == corpus.sequences


def test_split_edges():
    corpus = generate_synthetic(SyntheticSpec(sequences=10))
    train, test = split(corpus, 0)
    assert len(train) == 0 and len(test) == 10
    train, test = split(corpus, 10)
    assert len(train) == 10 and len(test) == 0
    assert train.labels == test.labels == corpus.labels
    with pytest.raises(ValueError):
        split(corpus, 11)


def test_split_350_150():
    corpus = generate_synthetic(SyntheticSpec(sequences=500, min_length=2, max_length=4))
    train, test = split(corpus, 350)
    assert (len(train), len(test)) == (350, 150)
    assert train.sequences + test.sequences == corpus.sequences


def test_noise_free_planted_rule():
    rule = ConstraintTemplate(BEGIN_END, "A", "B")
    corpus = generate_synthetic(SyntheticSpec(planted=(rule,), noise=0.0, sequences=50))
    assert all(y[0] == "A" and y[-1] == "B" for y in corpus.gold)


def test_same_seed_same_corpus():
    spec = SyntheticSpec(planted=(ConstraintTemplate(BEGIN_END, "A", "B"),), seed=7)
    assert dumps(generate_synthetic(spec)) == dumps(generate_synthetic(spec))
    other = SyntheticSpec(planted=spec.planted, seed=8)
    assert dumps(generate_synthetic(other)) != dumps(generate_synthetic(spec))


def test_noise_rate_concentrates():
    rule = ConstraintTemplate(BEGIN_END, "A", "B")
    corpus = generate_synthetic(SyntheticSpec(planted=(rule,), noise=0.1, sequences=1000, seed=0))
    firing = [y for y in corpus.gold if fires(rule, y)]
    rate = sum(not holds(rule, y) for y in firing) / len(firing)
    assert len(firing) == 1000
    assert 0.07 <= rate <= 0.13


def test_unforced_antecedents_follow_the_chain():
    rule = ConstraintTemplate(PRESENCE_PRECEDENCE, "A", "B")
    corpus = generate_synthetic(
        SyntheticSpec(planted=(rule,), noise=0.0, sequences=200, force_antecedents=False, seed=2)
    )
    assert all(holds(rule, y) for y in corpus.gold)
    assert 0 < sum(fires(rule, y) for y in corpus.gold) < 200


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(min_length=5, max_length=3)
    with pytest.raises(ValueError):
        SyntheticSpec(noise=1.5)
    with pytest.raises(ValueError):
        SyntheticSpec(planted=(ConstraintTemplate(BEGIN_END, "A", "Q"),))


def test_spec_file(tmp_path):
    path = tmp_path / "spec.txt"
    path.write_text(
        "# demo\nlabels = A,B,C\nplanted = begin_end:A:B;state_change:A:B:C\nnoise=0.2\nseed=4\n"
        "force_antecedents=false\nconcentration=2.5\n"
    )
    spec = load_synthetic_spec(path)
    assert spec.labels == ("A", "B", "C") and spec.seed == 4 and spec.noise == 0.2
    assert spec.planted[1] == ConstraintTemplate("state_change", "A", "B", "C")
    assert spec.force_antecedents is False and spec.concentration == 2.5
    path.write_text("labels=A,B\nbogus=1\n")
    with pytest.raises(DataError, match="line 2"):
        load_synthetic_spec(path)


def test_governed_positions():
    rule = ConstraintTemplate(BEGIN_END, "A", "B")
    assert governed_positions(rule, ["C", "A", "C", "D"]) == {0, 1, 3}
    other = ConstraintTemplate(PRESENCE_PRECEDENCE, "A", "B")
    assert governed_positions(other, ["C", "A", "B"]) == {1, 2}


def test_corpus_checks():
    with pytest.raises(DataError):
        Corpus(((("a", "b"), ("A",)),))
    with pytest.raises(DataError):
        Corpus(((("a",), ("A",)),), labels=("B",))
