"""Multi-head scaled dot-product self-attention."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoder import glorot
from .numerics import (
    ConfigurationError,
    DimensionError,
    Parameter,
    as_tensor,
    concat,
    matmul,
    mul,
    softmax,
    transpose,
)


@dataclass
class AttentionConfig:
    model_dim: int = 200
    heads: int = 4
    # False scales scores by sqrt(model_dim); True by sqrt(head_dim)
    scale_by_head_dim: bool = False

    def __post_init__(self):
        if self.heads < 1 or self.model_dim < 1:
            raise ConfigurationError("heads and model_dim must be positive")
        if self.model_dim % self.heads:
            raise ConfigurationError(
                f"{self.heads} heads do not divide model dimension {self.model_dim}"
            )

    @property
    def head_dim(self):
        return self.model_dim // self.heads

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.head_dim if self.scale_by_head_dim else self.model_dim)


# Query and key projections start equal and scaled up, so initial scores
# favour each position's own row.  With no residual around the attention
# block, near-uniform initial weights would average away per-position
# identity before the capsules ever see it.
QK_INIT_GAIN = 4.0


class AttentionParams:
    def __init__(self, config, rng=None, name="attention"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        d, dh = config.model_dim, config.head_dim
        self.w_q, self.w_k, self.w_v = [], [], []
        for i in range(config.heads):
            w = QK_INIT_GAIN * glorot(rng, (d, dh))
            self.w_q.append(Parameter(w, f"{name}.head{i}.w_q"))
            self.w_k.append(Parameter(w.copy(), f"{name}.head{i}.w_k"))
            self.w_v.append(Parameter(glorot(rng, (d, dh)), f"{name}.head{i}.w_v"))
        self.w_o = Parameter(glorot(rng, (config.heads * dh, d)), f"{name}.w_o")

    def parameters(self):
        out = []
        for triple in zip(self.w_q, self.w_k, self.w_v):
            out.extend(triple)
        return out + [self.w_o]


def scaled_dot_attention(q, k, v, scale=None, weights_out=None):
    """softmax(q k^T * scale) v, row-normalised over keys.

    ``scale`` defaults to 1/sqrt(q.shape[1]).  When ``weights_out`` is a
    list, the n x n weight matrix is appended to it.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if not (q.shape[0] == k.shape[0] == v.shape[0]) or q.shape[1] != k.shape[1]:
        raise DimensionError(f"attention shapes q{q.shape} k{k.shape} v{v.shape} disagree")
    if scale is None:
        scale = 1.0 / math.sqrt(q.shape[1])
    weights = softmax(mul(matmul(q, transpose(k)), scale), axis=1)
    if weights_out is not None:
        weights_out.append(weights.data)
    return matmul(weights, v)


def multi_head(params, h_in, weights_out=None):
    h_in = as_tensor(h_in)
    cfg = params.config
    if h_in.ndim != 2 or h_in.shape[1] != cfg.model_dim:
        raise DimensionError(f"expected n x {cfg.model_dim} input, got {h_in.shape}")
    heads = [
        scaled_dot_attention(
            matmul(h_in, wq), matmul(h_in, wk), matmul(h_in, wv), cfg.scale, weights_out
        )
        for wq, wk, wv in zip(params.w_q, params.w_k, params.w_v)
    ]
    joined = heads[0] if len(heads) == 1 else concat(heads, axis=1)
    return matmul(joined, params.w_o)
