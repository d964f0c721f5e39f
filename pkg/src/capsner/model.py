"""The full tagger network and its ablation variants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import capsnet, decoder
from .attention import AttentionConfig, AttentionParams, multi_head
from .capsnet import CapsuleConfig, CapsuleLayer
from .corpus import transition_mask
from .embedding import COMPOSED, ComposedEmbeddings, EmbeddingConfig, FileEmbeddings
from .encoder import BiGRU, bigru_forward, glorot
from .numerics import ConfigurationError, Parameter, add, dropout, matmul

FULL = "full"
NO_ATTENTION = "no_attention"
SCALAR_HEAD = "scalar_head"
TRAINABLE_EMBED = "trainable_embed"
ABLATIONS = (FULL, NO_ATTENTION, SCALAR_HEAD, TRAINABLE_EMBED)


@dataclass
class ModelConfig:
    ablation: str = FULL
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    hidden_dim: int = 100
    attention_heads: int = 4
    scale_by_head_dim: bool = False
    capsule: CapsuleConfig = field(default_factory=CapsuleConfig)
    dropout: float = 0.5
    hard_mask: bool | None = None  # None: on, except for the scalar head
    use_stop: bool = True

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"unknown ablation {self.ablation!r}; choose from {ABLATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.hidden_dim < 1:
            raise ConfigurationError("hidden_dim must be positive")

    @property
    def masked(self):
        if self.hard_mask is None:
            return self.ablation != SCALAR_HEAD
        return self.hard_mask


class ScalarHead:
    """Linear map d -> L used in place of the capsule layer."""

    def __init__(self, input_dim, num_labels, rng, name="scalar_head"):
        self.w = Parameter(glorot(rng, (input_dim, num_labels)), f"{name}.w")
        self.b = Parameter(np.zeros(num_labels), f"{name}.b")

    def parameters(self):
        return [self.w, self.b]


class Tagger:
    """embedding -> BiGRU -> self-attention -> capsules -> transitions."""

    def __init__(self, config, label_set, *, chars=(), embeddings=None, seed=0):
        self.config = config
        self.label_set = label_set
        rng = np.random.default_rng(seed)
        emb_cfg = config.embedding
        if config.ablation == TRAINABLE_EMBED or emb_cfg.mode == COMPOSED:
            self.embeddings = ComposedEmbeddings(chars, emb_cfg.dim, emb_cfg.max_position, rng)
        else:
            if not isinstance(embeddings, FileEmbeddings):
                raise ConfigurationError("the file-backed embedding mode needs an embedding table")
            if embeddings.dim != emb_cfg.dim:
                raise ConfigurationError(
                    f"embedding table has dim {embeddings.dim}, config says {emb_cfg.dim}"
                )
            self.embeddings = embeddings
        L = len(label_set)
        self.encoder = BiGRU(emb_cfg.dim, config.hidden_dim, rng)
        d = self.encoder.output_dim
        self.attention = None
        if config.ablation != NO_ATTENTION:
            att_cfg = AttentionConfig(d, config.attention_heads, config.scale_by_head_dim)
            self.attention = AttentionParams(att_cfg, rng)
        if config.ablation == SCALAR_HEAD:
            self.head = ScalarHead(d, L, rng)
        else:
            self.head = CapsuleLayer(d, L, config.capsule, rng)
        mask = transition_mask(label_set) if config.masked else None
        self.transitions = decoder.TransitionMatrix(L, mask, config.use_stop)

    def parameters(self):
        params = []
        if isinstance(self.embeddings, ComposedEmbeddings):
            params += self.embeddings.parameters()
        params += self.encoder.parameters()
        if self.attention is not None:
            params += self.attention.parameters()
        params += self.head.parameters()
        params += self.transitions.parameters()
        return params

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def emissions(self, chars, training=False, rng=None, trace=None):
        """n x L emission scores for one character sequence.

        ``trace`` (a dict) collects attention weights and routing couplings.
        """
        rate = self.config.dropout
        x = self.embeddings.embed(chars)
        x = dropout(x, rate, rng, training)
        h = bigru_forward(self.encoder, x)
        if self.attention is not None:
            weights = [] if trace is not None else None
            h = multi_head(self.attention, h, weights)
            h = dropout(h, rate, rng, training)
            if trace is not None:
                trace["attention"] = weights
        if isinstance(self.head, ScalarHead):
            return add(matmul(h, self.head.w), self.head.b)
        couplings = [] if trace is not None else None
        e = capsnet.emissions(self.head, h, couplings)
        if trace is not None:
            trace["couplings"] = couplings
        return e

    def loss(self, chars, tags, training=False, rng=None):
        y = self.label_set.encode(tags)
        e = self.emissions(chars, training, rng)
        return decoder.nll_loss(e, self.transitions, y)

    def decode(self, chars):
        e = self.emissions(chars)
        path, _ = decoder.viterbi_decode(e, self.transitions)
        return self.label_set.decode(path)

    def unknown_chars(self, chars):
        index = self.embeddings.index
        return sorted({c for c in chars if c not in index})
