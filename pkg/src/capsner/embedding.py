"""Character vectors: a frozen table read from disk, or a trainable
char + position + segment sum."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .numerics import ConfigurationError, Parameter, Tensor, add, take_rows
from .corpus import ParseError

log = logging.getLogger(__name__)

CLS, SEP, UNK, PAD = "[CLS]", "[SEP]", "[UNK]", "[PAD]"
RESERVED = (CLS, SEP, UNK, PAD)

FILE_BACKED = "file_backed"
COMPOSED = "trainable_composed"


class SequenceLengthError(ValueError):
    pass


@dataclass
class EmbeddingConfig:
    mode: str = FILE_BACKED
    dim: int = 768
    max_position: int = 512

    def __post_init__(self):
        if self.mode not in (FILE_BACKED, COMPOSED):
            raise ConfigurationError(f"unknown embedding mode {self.mode!r}")
        if self.dim <= 0 or self.max_position <= 0:
            raise ConfigurationError("embedding dim and max_position must be positive")


class FileEmbeddings:
    """Fixed per-token vectors, e.g. exported from a pretrained encoder."""

    def __init__(self, tokens, table):
        table = np.asarray(table, dtype=np.float64)
        tokens = list(tokens)
        if table.ndim != 2 or table.shape[0] != len(tokens):
            raise ConfigurationError(
                f"table shape {table.shape} does not match {len(tokens)} tokens"
            )
        missing = [t for t in RESERVED if t not in tokens]
        if missing:
            tokens += missing
            table = np.vstack([table, np.zeros((len(missing), table.shape[1]))])
        self.tokens = tokens
        self.table = Tensor(table)
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ConfigurationError("duplicate tokens in embedding table")

    @property
    def dim(self):
        return self.table.shape[1]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def lookup(self, chars):
        unk = self.index[UNK]
        return [self.index.get(c, unk) for c in chars]

    def embed(self, chars):
        return take_rows(self.table, self.lookup(chars))

    def vector(self, token):
        return self.table.data[self.index[token]]


def load_embedding_file(path):
    """Parse ``<count> <dim>`` then ``<token> <f1> ... <fdim>`` per line."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty embedding file", 1)
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError("header must be '<vocab_size> <dim>'", 1)
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must be two integers", 1) from None
    if dim <= 0:
        raise ParseError(f"dimension must be positive, got {dim}", 1)
    tokens, rows = [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], 2):
        if line.startswith(" "):
            token, rest = " ", line[2:]
        else:
            token, _, rest = line.partition(" ")
        fields = rest.split()
        if len(fields) != dim:
            raise ParseError(f"expected {dim} values, found {len(fields)}", lineno)
        if token in seen:
            raise ParseError(f"duplicate token {token!r}", lineno)
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            raise ParseError("non-numeric vector entry", lineno) from None
        seen.add(token)
        tokens.append(token)
    if len(tokens) != count:
        raise ParseError(f"header announces {count} rows, found {len(tokens)}", 1)
    missing = [t for t in RESERVED if t not in seen]
    if missing:
        log.warning("embedding file lacks %s; using zero vectors", ", ".join(missing))
    table = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return FileEmbeddings(tokens, table)


def write_embedding_file(embeddings, path):
    table = embeddings.table.data
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(embeddings.tokens)} {table.shape[1]}\n")
        for tok, row in zip(embeddings.tokens, table):
            fh.write(tok + " " + " ".join(repr(float(v)) for v in row) + "\n")


def random_embeddings(chars, dim, seed=0):
    """Gaussian stand-in vectors for a character vocabulary plus reserved tokens."""
    tokens = list(RESERVED) + [c for c in chars if c not in RESERVED]
    rng = np.random.default_rng(seed)
    return FileEmbeddings(tokens, rng.standard_normal((len(tokens), dim)))


class ComposedEmbeddings:
    """Row i is ``char_table[c_i] + position_table[i] + segment``."""

    def __init__(self, chars, dim, max_position, rng):
        self.tokens = list(RESERVED) + [c for c in chars if c not in RESERVED]
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.max_position = max_position
        self.char_table = Parameter(
            rng.uniform(-0.05, 0.05, (len(self.tokens), dim)), "embedding.char_table"
        )
        self.position_table = Parameter(
            rng.uniform(-0.05, 0.05, (max_position, dim)), "embedding.position_table"
        )
        # single-sentence inputs: segment vector starts at zero
        self.segment = Parameter(np.zeros((1, dim)), "embedding.segment")

    @property
    def dim(self):
        return self.char_table.shape[1]

    def parameters(self):
        return [self.char_table, self.position_table, self.segment]

    def lookup(self, chars):
        unk = self.index[UNK]
        return [self.index.get(c, unk) for c in chars]

    def embed(self, chars):
        n = len(chars)
        if n > self.max_position:
            raise SequenceLengthError(
                f"sentence of length {n} exceeds max_position {self.max_position}"
            )
        rows = take_rows(self.char_table, self.lookup(chars))
        pos = take_rows(self.position_table, np.arange(n))
        return add(add(rows, pos), self.segment)
