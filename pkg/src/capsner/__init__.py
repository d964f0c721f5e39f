"""Character-level BIOES entity tagger: BiGRU encoder, multi-head
self-attention, a capsule classifier with dynamic routing and a linear-chain
transition decoder, all on a small numpy autodiff core."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .corpus import (
    Corpus,
    EntitySpan,
    LabelSet,
    Sentence,
    SyntheticConfig,
    bioes_decode,
    bioes_encode,
    generate_synthetic,
    load_conll,
    transition_mask,
    write_conll,
)
from .embedding import FileEmbeddings, load_embedding_file, random_embeddings
from .estimator import CapsuleTagger
from .model import ModelConfig, Tagger
from .numerics import ConfigurationError, DimensionError, NumericError
from .training import EvalReport, TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "CapsuleTagger",
    "CheckpointError",
    "ConfigurationError",
    "Corpus",
    "DimensionError",
    "EntitySpan",
    "EvalReport",
    "FileEmbeddings",
    "LabelSet",
    "ModelConfig",
    "NumericError",
    "Sentence",
    "SyntheticConfig",
    "Tagger",
    "TrainConfig",
    "bioes_decode",
    "bioes_encode",
    "evaluate",
    "generate_synthetic",
    "load_checkpoint",
    "load_conll",
    "load_embedding_file",
    "random_embeddings",
    "save_checkpoint",
    "train",
    "transition_mask",
    "write_conll",
]
