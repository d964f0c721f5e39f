"""Checkpoint directories: a JSON ``manifest`` plus one float32 file per tensor.

Layout::

    <dir>/manifest              version, config, labels, vocabulary, tensor shapes
    <dir>/tensors/<name>.f32    row-major little-endian float32
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .corpus import LabelSet
from .embedding import RESERVED, FileEmbeddings
from .model import TRAINABLE_EMBED, Tagger

FORMAT_VERSION = 1
MANIFEST = "manifest"
TENSOR_DIR = "tensors"
_F32 = np.dtype("<f4")


class CheckpointError(RuntimeError):
    pass


def _tensors(model):
    out = {p.name: p.data for p in model.parameters()}
    if isinstance(model.embeddings, FileEmbeddings):
        out["embedding.table"] = model.embeddings.table.data
    return out


def save_checkpoint(model, directory, config):
    """Write ``model`` (built from TrainConfig ``config``) into ``directory``."""
    directory = Path(directory)
    (directory / TENSOR_DIR).mkdir(parents=True, exist_ok=True)
    tensors = _tensors(model)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "entity_types": list(model.label_set.entity_types),
        "labels": list(model.label_set.tags),
        "vocabulary": list(model.embeddings.tokens),
        "tensors": {name: list(arr.shape) for name, arr in tensors.items()},
    }
    for name, arr in tensors.items():
        path = directory / TENSOR_DIR / f"{name}.f32"
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(np.ascontiguousarray(arr, dtype=_F32).tobytes())
        os.replace(tmp, path)
    text = json.dumps(manifest, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    (directory / MANIFEST).write_text(text, encoding="utf-8")
    return directory


def _read_tensor(directory, name, shape):
    path = directory / TENSOR_DIR / f"{name}.f32"
    if not path.is_file():
        raise CheckpointError(f"missing tensor file for {name!r} ({path})")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * _F32.itemsize
    if len(raw) != expected:
        raise CheckpointError(
            f"tensor {name!r} has {len(raw)} bytes, manifest shape {shape} needs {expected}"
        )
    return np.frombuffer(raw, dtype=_F32).astype(np.float64).reshape(shape)


def read_manifest(directory):
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise CheckpointError(f"no manifest in {directory}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"manifest is not valid JSON: {exc}") from None
    for key in ("format_version", "config", "entity_types", "labels", "vocabulary", "tensors"):
        if key not in manifest:
            raise CheckpointError(f"manifest lacks field {key!r}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported format_version {manifest['format_version']!r} "
            f"(expected {FORMAT_VERSION})"
        )
    return manifest


def load_checkpoint(directory):
    """Rebuild a Tagger and its TrainConfig from ``directory``."""
    from .training import TrainConfig

    directory = Path(directory)
    manifest = read_manifest(directory)
    try:
        config = TrainConfig(**manifest["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"config field is invalid: {exc}") from None
    label_set = LabelSet(manifest["entity_types"])
    if list(label_set.tags) != manifest["labels"]:
        raise CheckpointError("labels field does not match entity_types")
    shapes = {k: tuple(v) for k, v in manifest["tensors"].items()}
    tokens = manifest["vocabulary"]

    embeddings = None
    if config.ablation != TRAINABLE_EMBED:
        if "embedding.table" not in shapes:
            raise CheckpointError("tensors field lacks 'embedding.table'")
        table = _read_tensor(directory, "embedding.table", shapes["embedding.table"])
        embeddings = FileEmbeddings(tokens, table)
    chars = [t for t in tokens if t not in RESERVED]
    model = Tagger(config.model_config(), label_set, chars=chars, embeddings=embeddings)
    if list(model.embeddings.tokens) != tokens:
        raise CheckpointError("vocabulary field does not match the rebuilt embedding table")

    for p in model.parameters():
        if p.name not in shapes:
            raise CheckpointError(f"tensors field lacks {p.name!r}")
        if shapes[p.name] != p.shape:
            raise CheckpointError(
                f"tensor {p.name!r}: manifest shape {shapes[p.name]} != model shape {p.shape}"
            )
        p.data[...] = _read_tensor(directory, p.name, p.shape)
    return model, config
