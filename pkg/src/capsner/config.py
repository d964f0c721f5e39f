"""Flat ``key = value`` configuration files mapped onto dataclass fields."""

from __future__ import annotations

import dataclasses
import types
import typing

from .numerics import ConfigurationError

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_NONE = {"none", "auto", "null", ""}


def read_keyvalue(path):
    """Parse ``key = value`` lines; ``#`` starts a comment.  Returns an ordered dict."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigurationError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


def _parse_scalar(kind, text, key):
    low = text.strip().lower()
    if kind is bool:
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigurationError(f"{key}: expected a boolean, got {text!r}")
    if kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            raise ConfigurationError(f"{key}: expected {kind.__name__}, got {text!r}") from None
    if kind is tuple:
        return tuple(p.strip() for p in text.split(",") if p.strip())
    return text.strip()


def _field_kind(tp):
    """Return (base type, optional) for a resolved annotation."""
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return args[0], True
    if origin is tuple:
        return tuple, False
    return tp, False


def coerce(cls, raw):
    """Convert string values in ``raw`` to the field types of dataclass ``cls``.

    Unknown keys raise ConfigurationError naming every offender.
    """
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown configuration key(s): {', '.join(unknown)}")
    out = {}
    for key, value in raw.items():
        if not isinstance(value, str):
            out[key] = value
            continue
        kind, optional = _field_kind(hints[key])
        if optional and value.strip().lower() in _NONE:
            out[key] = None
        else:
            out[key] = _parse_scalar(kind, value, key)
    return out


def format_value(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)
