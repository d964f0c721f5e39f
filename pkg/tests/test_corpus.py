import itertools
import logging

import numpy as np
import pytest

from capsner.corpus import (
    Corpus,
    EntitySpan,
    LabelSet,
    ParseError,
    Sentence,
    SpanError,
    ValidityError,
    _partition,
    bioes_decode,
    bioes_encode,
    corpus_stats,
    format_conll,
    generate_synthetic,
    load_conll,
    transition_mask,
    write_conll,
    SyntheticConfig,
)
from capsner.numerics import ConfigurationError


def write(tmp_path, text, name="c.conll"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# -- load_conll -------------------------------------------------------------------


def test_load_minimal_file(tmp_path):
    c = load_conll(write(tmp_path, "中\tB-LOC\n国\tE-LOC\n\n"))
    assert len(c) == 1
    assert c.sentences[0].chars == ("中", "国")
    assert c.sentences[0].tags == ("B-LOC", "E-LOC")
    assert c.flags == ()


def test_load_empty_file_flags_no_sentences(tmp_path):
    c = load_conll(write(tmp_path, ""))
    assert len(c) == 0
    assert "no sentences" in c.flags


def test_load_bad_tag_reports_line(tmp_path):
    with pytest.raises(ParseError) as info:
        load_conll(write(tmp_path, "X\tQ-LOC\n"))
    assert info.value.line == 1


def test_load_wrong_field_count_reports_line(tmp_path):
    with pytest.raises(ParseError) as info:
        load_conll(write(tmp_path, "a\tO\n\nb\tO\textra\n"))
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_trailing_blank_lines_ignored(tmp_path):
    c = load_conll(write(tmp_path, "a\tO\n\n\n\nb\tS-PER\n\n\n"))
    assert [s.text for s in c.sentences] == ["a", "b"]


def test_incomplete_family_is_completed_with_warning(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        c = load_conll(write(tmp_path, "a\tS-PER\nb\tO\n"))
    assert c.label_set.tags == ("O", "B-PER", "I-PER", "E-PER", "S-PER")
    assert "PER" in caplog.text


def test_write_then_load_round_trip(tmp_path):
    c = generate_synthetic(sentences=15, seed=3)
    path = tmp_path / "out.conll"
    write_conll(c, path)
    back = load_conll(path)
    assert back.sentences == c.sentences
    assert path.read_text(encoding="utf-8") == format_conll(c.sentences)


def test_sentence_validation():
    with pytest.raises(ValueError):
        Sentence(("a",), ())
    with pytest.raises(ValueError):
        Sentence((), ())


# -- label set / mask ---------------------------------------------------------------


def test_label_set_layout():
    ls = LabelSet(["PER", "LOC"])
    assert ls.tags[0] == "O"
    assert ls.tags[1:5] == ("B-LOC", "I-LOC", "E-LOC", "S-LOC")
    assert len(ls) == 9 and ls.start == 9 and ls.stop == 10
    assert ls.decode(ls.encode(["O", "S-PER"])) == ["O", "S-PER"]


def test_mask_examples():
    ls = LabelSet(["PER"])
    m = transition_mask(ls)
    i = ls.index
    assert m[i("B-PER"), i("E-PER")]
    assert not m[i("B-PER"), i("O")]
    assert not m[ls.start, i("I-PER")]
    assert m.shape == (len(ls) + 2, len(ls) + 2)
    assert not m[ls.stop].any()
    assert not m[:, ls.start].any()
    assert m[i("E-PER"), ls.stop] and not m[i("I-PER"), ls.stop]


def test_mask_agrees_with_strict_decode_exhaustively():
    ls = LabelSet(["A", "B"])
    m = transition_mask(ls)
    for n in range(1, 5):
        for idx in itertools.product(range(len(ls)), repeat=n):
            path = [ls.start, *idx, ls.stop]
            ok_mask = all(m[a, b] for a, b in zip(path, path[1:]))
            try:
                bioes_decode(ls.decode(idx), strict=True)
                ok_strict = True
            except ValidityError:
                ok_strict = False
            assert ok_mask == ok_strict, ls.decode(idx)


# -- BIOES codec -----------------------------------------------------------------------


def test_encode_examples():
    spans = [EntitySpan("PER", 0, 1), EntitySpan("LOC", 3, 3)]
    assert bioes_encode(4, spans) == ["B-PER", "E-PER", "O", "S-LOC"]
    assert bioes_encode(3, []) == ["O", "O", "O"]
    assert bioes_encode(5, [EntitySpan("X", 0, 3)]) == ["B-X", "I-X", "I-X", "E-X", "O"]


def test_encode_overlap_and_bounds():
    with pytest.raises(SpanError, match="overlap"):
        bioes_encode(2, [EntitySpan("X", 0, 1), EntitySpan("Y", 1, 1)])
    with pytest.raises(SpanError):
        bioes_encode(2, [EntitySpan("X", 1, 2)])


def test_decode_examples():
    assert bioes_decode(["B-PER", "E-PER", "O", "S-LOC"]) == [
        EntitySpan("PER", 0, 1),
        EntitySpan("LOC", 3, 3),
    ]
    assert bioes_decode(["O", "O"]) == []


def test_strict_decode_names_position():
    with pytest.raises(ValidityError) as info:
        bioes_decode(["O", "B-PER", "O"])
    assert info.value.position == 2
    with pytest.raises(ValidityError) as info:
        bioes_decode(["B-PER"])
    assert info.value.position == 1


def test_lenient_decode_keeps_well_formed_spans():
    tags = ["B-PER", "O", "S-LOC", "I-ORG", "E-ORG", "B-ORG", "E-ORG", "B-PER", "E-LOC"]
    assert bioes_decode(tags, strict=False) == [
        EntitySpan("LOC", 2, 2),
        EntitySpan("ORG", 5, 6),
    ]


def random_spans(rng, n, types):
    spans, pos = [], 0
    while pos < n:
        if rng.random() < 0.4:
            length = int(rng.integers(1, min(4, n - pos) + 1))
            spans.append(EntitySpan(types[int(rng.integers(len(types)))], pos, pos + length - 1))
            pos += length
        else:
            pos += 1
    return spans


def test_round_trip_1000_random_span_sets():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 16))
        spans = random_spans(rng, n, ("PER", "LOC", "ORG"))
        assert bioes_decode(bioes_encode(n, spans)) == spans


# -- synthetic generator -----------------------------------------------------------------


def test_generator_deterministic():
    a = generate_synthetic(sentences=10, seed=1)
    b = generate_synthetic(sentences=10, seed=1)
    assert a.sentences == b.sentences
    assert generate_synthetic(sentences=10, seed=2).sentences != a.sentences


def test_generator_emits_strict_valid_tags():
    c = generate_synthetic(sentences=200, seed=5)
    for s in c.sentences:
        bioes_decode(s.tags, strict=True)
        assert 8 <= len(s) <= 20


def test_generator_char_ranges_disjoint():
    cfg = SyntheticConfig()
    filler, owned = _partition(cfg)
    ranges = [set(filler)] + [set(v) for v in owned.values()]
    for a, b in itertools.combinations(ranges, 2):
        assert not a & b
    c = generate_synthetic(cfg)
    filler = set(filler)
    for s in c.sentences:
        for ch, tag in zip(s.chars, s.tags):
            if tag == "O":
                assert ch in filler
            else:
                assert ch in set(owned[tag[2:]])
    assert len(c.char_vocabulary) <= cfg.vocab_size


def test_generator_rejects_bad_config():
    with pytest.raises(ConfigurationError):
        generate_synthetic(vocab_size=5)
    with pytest.raises(ConfigurationError):
        generate_synthetic(entity_types=())


def test_corpus_stats_counts_entities():
    s = Sentence("abcd", ["B-PER", "E-PER", "O", "S-LOC"])
    stats = corpus_stats(Corpus.from_sentences([s]))
    assert stats == {"sentences": 1, "chars": 4, "entities": {"LOC": 1, "PER": 1}}
