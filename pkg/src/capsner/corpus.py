"""CoNLL ingestion, BIOES span coding, label sets and synthetic corpora."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import ConfigurationError

log = logging.getLogger(__name__)

OUTSIDE = "O"
PREFIXES = ("B", "I", "E", "S")
_TAG_RE = re.compile(r"^([BIES])-(\S.*)$")


class ParseError(ValueError):
    """Malformed corpus or tag input; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SpanError(ValueError):
    """Spans that overlap or fall outside the sentence."""


class ValidityError(ValueError):
    """A tag sequence that breaks the BIOES transition rules."""

    def __init__(self, message, position):
        self.position = position
        super().__init__(f"position {position}: {message}")


def parse_tag(tag):
    """Split a tag into ``(prefix, entity_type)``; ``O`` gives ``("O", None)``."""
    if tag == OUTSIDE:
        return OUTSIDE, None
    m = _TAG_RE.match(tag)
    if m is None:
        raise ParseError(f"tag {tag!r} is not O or B/I/E/S-<type>")
    return m.group(1), m.group(2)


@dataclass(frozen=True)
class EntitySpan:
    entity_type: str
    start: int
    end: int  # inclusive


@dataclass(frozen=True)
class Sentence:
    chars: tuple
    tags: tuple

    def __post_init__(self):
        object.__setattr__(self, "chars", tuple(self.chars))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.chars) != len(self.tags):
            raise ValueError(f"{len(self.chars)} chars but {len(self.tags)} tags")
        if not self.chars:
            raise ValueError("a sentence needs at least one character")
        for t in self.tags:
            parse_tag(t)

    def __len__(self):
        return len(self.chars)

    @property
    def text(self):
        return "".join(self.chars)


class LabelSet:
    """Closed, ordered tag vocabulary with START/STOP indices appended.

    ``O`` comes first, then ``B, I, E, S`` for each entity type in sorted
    order.  Indices ``0..L-1`` are tags, ``L`` is START and ``L+1`` is STOP.
    """

    def __init__(self, entity_types=()):
        self.entity_types = tuple(sorted(set(entity_types)))
        self.tags = (OUTSIDE,) + tuple(
            f"{p}-{t}" for t in self.entity_types for p in PREFIXES
        )
        self._index = {t: i for i, t in enumerate(self.tags)}

    @classmethod
    def from_tags(cls, tags):
        """Build from observed tags, completing partial B/I/E/S families."""
        seen = {}
        for tag in tags:
            prefix, etype = parse_tag(tag)
            if etype is not None:
                seen.setdefault(etype, set()).add(prefix)
        for etype, prefixes in sorted(seen.items()):
            missing = [p for p in PREFIXES if p not in prefixes]
            if missing:
                log.warning(
                    "entity type %s lacks %s; adding the missing tags",
                    etype,
                    ", ".join(f"{p}-{etype}" for p in missing),
                )
        return cls(seen)

    def __len__(self):
        return len(self.tags)

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.tags == other.tags

    def __hash__(self):
        return hash(self.tags)

    def __repr__(self):
        return f"LabelSet({list(self.entity_types)})"

    def __contains__(self, tag):
        return tag in self._index

    @property
    def start(self):
        return len(self.tags)

    @property
    def stop(self):
        return len(self.tags) + 1

    def index(self, tag):
        try:
            return self._index[tag]
        except KeyError:
            raise KeyError(f"tag {tag!r} not in label set") from None

    def encode(self, tags):
        return [self.index(t) for t in tags]

    def decode(self, indices):
        return [self.tags[i] for i in indices]


@dataclass
class Corpus:
    sentences: list
    label_set: LabelSet
    char_vocabulary: tuple
    flags: tuple = field(default=())

    def __len__(self):
        return len(self.sentences)

    @classmethod
    def from_sentences(cls, sentences, label_set=None):
        sentences = list(sentences)
        if label_set is None:
            label_set = LabelSet.from_tags(t for s in sentences for t in s.tags)
        for s in sentences:
            for t in s.tags:
                if t not in label_set:
                    raise ParseError(f"tag {t!r} not in label set {label_set!r}")
        vocab = tuple(sorted({c for s in sentences for c in s.chars}))
        flags = () if sentences else ("no sentences",)
        return cls(sentences, label_set, vocab, flags)


def load_conll(path):
    """Read a two-column ``<char>\\t<tag>`` file; blank lines end sentences."""
    sentences = []
    chars, tags = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, raw in enumerate(lines, 1):
        line = raw[:-1] if raw.endswith("\r") else raw
        if line == "":
            if chars:
                sentences.append(Sentence(chars, tags))
                chars, tags = [], []
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected <char><TAB><tag>, got {len(parts)} field(s)", lineno)
        ch, tag = parts
        if len(ch) != 1:
            raise ParseError(f"token {ch!r} is not a single character", lineno)
        try:
            parse_tag(tag)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        chars.append(ch)
        tags.append(tag)
    if chars:
        sentences.append(Sentence(chars, tags))
    return Corpus.from_sentences(sentences)


def format_conll(sentences):
    out = []
    for s in sentences:
        out.extend(f"{c}\t{t}\n" for c, t in zip(s.chars, s.tags))
        out.append("\n")
    return "".join(out)


def write_conll(corpus, path):
    sentences = corpus.sentences if isinstance(corpus, Corpus) else corpus
    Path(path).write_text(format_conll(sentences), encoding="utf-8")


# -- BIOES codec -------------------------------------------------------------------


def bioes_encode(length, spans):
    tags = [OUTSIDE] * length
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for s in ordered:
        if not 0 <= s.start <= s.end < length:
            raise SpanError(f"span {s} outside sentence of length {length}")
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise SpanError(f"spans {a} and {b} overlap")
    for s in ordered:
        t = s.entity_type
        if s.start == s.end:
            tags[s.start] = f"S-{t}"
        else:
            tags[s.start] = f"B-{t}"
            for k in range(s.start + 1, s.end):
                tags[k] = f"I-{t}"
            tags[s.end] = f"E-{t}"
    return tags


def _allowed(prev, cur):
    """BIOES rule on parsed tags; ``None`` stands for START (prev) or STOP (cur)."""
    if prev is None:
        return cur is not None and cur[0] in (OUTSIDE, "B", "S")
    p, pt = prev
    if p in ("B", "I"):
        return cur is not None and cur[0] in ("I", "E") and cur[1] == pt
    # E, S, O
    return cur is None or cur[0] in (OUTSIDE, "B", "S")


def bioes_decode(tags, strict=True):
    parsed = [parse_tag(t) for t in tags]
    if strict:
        prev = None
        for i, cur in enumerate(parsed + [None]):
            if not _allowed(prev, cur):
                what = "end of sequence" if cur is None else repr(tags[i])
                after = "start" if prev is None else repr(tags[i - 1])
                raise ValidityError(f"{what} cannot follow {after}", i)
            prev = cur

    spans = []
    open_type, open_start = None, None
    for i, (prefix, etype) in enumerate(parsed):
        if prefix == "B":
            open_type, open_start = etype, i
        elif prefix == "I":
            if open_type != etype:
                open_type = None
        elif prefix == "E":
            if open_type == etype:
                spans.append(EntitySpan(etype, open_start, i))
            open_type = None
        elif prefix == "S":
            spans.append(EntitySpan(etype, i, i))
            open_type = None
        else:
            open_type = None
    return spans


def transition_mask(label_set):
    """Boolean ``(L+2, L+2)`` matrix; ``mask[i, j]`` means label j may follow label i."""
    n = len(label_set)
    mask = np.zeros((n + 2, n + 2), dtype=bool)
    parsed = [parse_tag(t) for t in label_set.tags]
    for j, cur in enumerate(parsed):
        mask[label_set.start, j] = _allowed(None, cur)
        for i, prev in enumerate(parsed):
            mask[i, j] = _allowed(prev, cur)
    for i, prev in enumerate(parsed):
        mask[i, label_set.stop] = _allowed(prev, None)
    return mask


# -- synthetic data -------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    sentences: int = 100
    vocab_size: int = 50
    entity_types: tuple = ("LOC", "ORG", "PER")
    min_length: int = 8
    max_length: int = 20
    patterns_per_type: int = 4
    max_entity_length: int = 4
    entity_rate: float = 0.25
    seed: int = 7
    first_codepoint: int = 0x4E00


def _partition(config):
    n_types = len(config.entity_types)
    per_type = max(1, config.vocab_size // (2 * n_types))
    n_filler = config.vocab_size - per_type * n_types
    if n_filler < 1:
        raise ConfigurationError("vocabulary too small for the requested entity types")
    chars = [chr(config.first_codepoint + k) for k in range(config.vocab_size)]
    filler = chars[:n_filler]
    owned = {}
    for k, etype in enumerate(config.entity_types):
        lo = n_filler + k * per_type
        owned[etype] = chars[lo : lo + per_type]
    return filler, owned


def generate_synthetic(config=None, **overrides):
    """Deterministic corpus of fixed entity patterns embedded in random filler.

    Each entity type owns a disjoint character range and a handful of fixed
    character patterns drawn from it.  Filler characters come from a separate
    range, and consecutive entities are always separated by filler, so the
    gold spans are recoverable from the characters alone.
    """
    config = config or SyntheticConfig()
    if overrides:
        config = SyntheticConfig(**{**config.__dict__, **overrides})
    if config.vocab_size < 10:
        raise ConfigurationError(f"vocab_size must be >= 10, got {config.vocab_size}")
    if not config.entity_types:
        raise ConfigurationError("at least one entity type is required")
    if config.sentences < 1:
        raise ConfigurationError(f"sentences must be >= 1, got {config.sentences}")
    if not 1 <= config.min_length <= config.max_length:
        raise ConfigurationError("need 1 <= min_length <= max_length")
    types = tuple(sorted(config.entity_types))
    config = SyntheticConfig(**{**config.__dict__, "entity_types": types})
    rng = np.random.default_rng(config.seed)
    filler, owned = _partition(config)

    patterns = {}
    for etype in types:
        pool = owned[etype]
        seen = []
        attempts = 0
        while len(seen) < config.patterns_per_type and attempts < 1000:
            attempts += 1
            length = int(rng.integers(1, config.max_entity_length + 1))
            pat = "".join(pool[int(k)] for k in rng.integers(0, len(pool), size=length))
            if pat not in seen:
                seen.append(pat)
        patterns[etype] = seen

    sentences = []
    for _ in range(config.sentences):
        target = int(rng.integers(config.min_length, config.max_length + 1))
        chars, spans = [], []
        last_entity = False
        while len(chars) < target:
            if not last_entity and rng.random() < config.entity_rate:
                etype = types[int(rng.integers(len(types)))]
                pat = patterns[etype][int(rng.integers(len(patterns[etype])))]
                if len(chars) + len(pat) <= target:
                    spans.append(EntitySpan(etype, len(chars), len(chars) + len(pat) - 1))
                    chars.extend(pat)
                    last_entity = True
                    continue
            chars.append(filler[int(rng.integers(len(filler)))])
            last_entity = False
        sentences.append(Sentence(chars, bioes_encode(len(chars), spans)))
    return Corpus.from_sentences(sentences, LabelSet(types))


def corpus_stats(corpus):
    counts = {t: 0 for t in corpus.label_set.entity_types}
    for s in corpus.sentences:
        for span in bioes_decode(s.tags, strict=False):
            counts[span.entity_type] = counts.get(span.entity_type, 0) + 1
    return {
        "sentences": len(corpus.sentences),
        "chars": sum(len(s) for s in corpus.sentences),
        "entities": counts,
    }
