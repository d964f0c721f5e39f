import logging

import numpy as np
import pytest

from capsner.corpus import ParseError
from capsner.embedding import (
    RESERVED,
    UNK,
    ComposedEmbeddings,
    EmbeddingConfig,
    FileEmbeddings,
    SequenceLengthError,
    load_embedding_file,
    random_embeddings,
    write_embedding_file,
)
from capsner.numerics import ConfigurationError, Parameter, Tape, grad_check


def test_minimal_file(tmp_path, caplog):
    p = tmp_path / "e.txt"
    p.write_text("2 3\nA 1 0 0\nB 0 1 0\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        emb = load_embedding_file(p)
    assert emb.dim == 3
    assert emb.vector("A").tolist() == [1.0, 0.0, 0.0]
    for tok in RESERVED:
        assert tok in emb
        assert not emb.vector(tok).any()
    assert "[UNK]" in caplog.text


def test_short_row_is_parse_error_at_line_3(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\nA 1 0 0\nB 0 1\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_embedding_file(p)
    assert info.value.line == 3


def test_duplicate_token_and_bad_header(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 1\nA 1\nA 2\n", encoding="utf-8")
    with pytest.raises(ParseError, match="duplicate"):
        load_embedding_file(p)
    p.write_text("two 1\nA 1\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_embedding_file(p)
    assert info.value.line == 1


def test_write_load_round_trip(tmp_path):
    emb = random_embeddings("中国人", 5, seed=3)
    p = tmp_path / "e.txt"
    write_embedding_file(emb, p)
    back = load_embedding_file(p)
    assert back.tokens == emb.tokens
    assert np.max(np.abs(back.table.data - emb.table.data)) <= 1e-6


def test_file_lookup_and_unk_fallback():
    emb = FileEmbeddings(["a", "b", UNK], np.arange(9.0).reshape(3, 3))
    out = emb.embed(["b", "z", "a"]).data
    assert out[0].tolist() == [3.0, 4.0, 5.0]
    assert out[1].tolist() == emb.vector(UNK).tolist()
    assert out[2].tolist() == [0.0, 1.0, 2.0]


def test_file_embeddings_are_frozen():
    emb = random_embeddings("ab", 4)
    with Tape():
        out = emb.embed("ab")
    assert not out.requires_grad


def test_composed_position_difference():
    emb = ComposedEmbeddings("xyz", 6, 16, np.random.default_rng(0))
    out = emb.embed("xabcdx").data
    expected = emb.position_table.data[0] - emb.position_table.data[5]
    assert np.allclose(out[0] - out[5], expected, atol=1e-15)


def test_composed_length_limit():
    emb = ComposedEmbeddings("x", 4, 3, np.random.default_rng(0))
    emb.embed("xxx")
    with pytest.raises(SequenceLengthError):
        emb.embed("xxxx")


def test_composed_gradients():
    emb = ComposedEmbeddings("abc", 3, 5, np.random.default_rng(1))
    w = np.random.default_rng(2).normal(size=(4, 3))
    assert grad_check(lambda: (emb.embed("abca") * w).sum(), emb.parameters()) < 1e-8
    assert all(isinstance(p, Parameter) for p in emb.parameters())


def test_config_validation():
    with pytest.raises(ConfigurationError):
        EmbeddingConfig(mode="other")
    with pytest.raises(ConfigurationError):
        EmbeddingConfig(dim=0)
