"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

from collections.abc import Sequence

from .corpus import Corpus, Sentence, parse_tag


def check_sequences(X, name="X"):
    """Return ``X`` as a list of character tuples.

    Accepts a Corpus, strings, or sequences of one-character strings.
    """
    if isinstance(X, Corpus):
        return [s.chars for s in X.sentences]
    if isinstance(X, str) or not isinstance(X, Sequence):
        raise TypeError(f"{name} must be a sequence of sentences, got {type(X).__name__}")
    out = []
    for k, item in enumerate(X):
        if isinstance(item, Sentence):
            chars = item.chars
        elif isinstance(item, str):
            chars = tuple(item)
        else:
            chars = tuple(item)
            if not all(isinstance(c, str) and len(c) == 1 for c in chars):
                raise TypeError(f"{name}[{k}] must contain single characters")
        if not chars:
            raise ValueError(f"{name}[{k}] is empty")
        out.append(chars)
    return out


def check_tagged(X, y=None):
    """Pair characters with tags, returning a list of Sentence objects."""
    if isinstance(X, Corpus):
        if y is not None:
            raise ValueError("pass either a Corpus or (X, y), not both")
        return list(X.sentences)
    if y is None:
        if all(isinstance(s, Sentence) for s in X):
            return list(X)
        raise ValueError("tags y are required unless X holds tagged sentences")
    chars = check_sequences(X)
    if len(y) != len(chars):
        raise ValueError(f"X has {len(chars)} sentences but y has {len(y)}")
    out = []
    for k, (c, tags) in enumerate(zip(chars, y)):
        tags = tuple(tags)
        if len(tags) != len(c):
            raise ValueError(f"sentence {k}: {len(c)} characters but {len(tags)} tags")
        for t in tags:
            parse_tag(t)
        out.append(Sentence(c, tags))
    return out
