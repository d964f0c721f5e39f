"""Capsule classifier: primary capsules, routing-by-agreement, norm scores.

All functions accept an optional leading position axis so a whole sentence
is routed in one vectorised call; positions never interact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import glorot
from .numerics import (
    ConfigurationError,
    DimensionError,
    Parameter,
    record,
    add,
    as_tensor,
    einsum,
    matmul,
    mul,
    norm,
    reshape,
    softmax,
    tsum,
)

DIGIT_AXIS = "digit"
PRIMARY_AXIS = "primary"


@dataclass
class CapsuleConfig:
    num_primary: int = 32
    primary_dim: int = 8
    digit_dim: int = 16
    routing_iterations: int = 3
    routing_axis: str = DIGIT_AXIS

    def __post_init__(self):
        for name in ("num_primary", "primary_dim", "digit_dim", "routing_iterations"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.routing_axis not in (DIGIT_AXIS, PRIMARY_AXIS):
            raise ConfigurationError("routing_axis must be 'digit' or 'primary'")


# Longest squashed vector.  n^2 / (1 + n^2) rounds to 1.0 once n > ~1e8, so
# lengths are capped a few ulps below 1 to keep the open bound after rounding.
LENGTH_CAP = 1.0 - 2.0**-48


def _squash_factor(n):
    # n / (1 + n^2), written to stay finite for large n
    big = n > 1.0
    safe = np.where(big, n, 1.0)
    small = np.where(big, 0.0, n)
    capped = np.minimum(1.0 / (safe + 1.0 / safe), LENGTH_CAP / safe)
    return np.where(big, capped, small / (1.0 + small * small))


def _squash_factor_grad(n):
    big = n > 1.0
    safe = np.where(big, n, 1.0)
    t = 1.0 / safe
    t2 = t * t
    is_capped = LENGTH_CAP / safe < 1.0 / (safe + t)
    big_grad = np.where(is_capped, -LENGTH_CAP * t2, t2 * (t2 - 1.0) / (t2 + 1.0) ** 2)
    small = np.where(big, 0.0, n)
    return np.where(big, big_grad, (1.0 - small * small) / (1.0 + small * small) ** 2)


def squash(s):
    """(|s|^2 / (1 + |s|^2)) * s / |s| along the last axis; zero maps to zero."""
    s = as_tensor(s)
    sd = s.data
    # rescale before squaring so huge inputs do not overflow
    peak = np.abs(sd).max(axis=-1, keepdims=True)
    peak = np.where(peak > 0, peak, 1.0)
    n = peak * np.sqrt(((sd / peak) ** 2).sum(axis=-1, keepdims=True))
    f = _squash_factor(n)
    v = sd * f

    def backward(g):
        fp = _squash_factor_grad(n)
        unit = np.divide(sd, n, out=np.zeros_like(sd), where=n > 0)
        dot = (g * sd).sum(axis=-1, keepdims=True)
        return (f * g + fp * dot * unit,)

    return record(v, (s,), backward)


class CapsuleLayer:
    """Primary projection ``W`` (d x P*dp) and per-pair routing weights ``W_ij``."""

    def __init__(self, input_dim, num_labels, config=None, rng=None, name="capsnet"):
        config = config or CapsuleConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.input_dim = input_dim
        self.num_labels = num_labels
        P, dp, dd = config.num_primary, config.primary_dim, config.digit_dim
        self.w_primary = Parameter(glorot(rng, (input_dim, P * dp)), f"{name}.w_primary")
        self.b_primary = Parameter(np.zeros(P * dp), f"{name}.b_primary")
        self.w_digit = Parameter(_digit_init(rng, (P, num_labels, dd, dp)), f"{name}.w_digit")

    def parameters(self):
        return [self.w_primary, self.b_primary, self.w_digit]


def _digit_init(rng, shape):
    dd, dp = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (dd + dp))
    return rng.uniform(-limit, limit, shape)


def primary_capsules(layer, h):
    """Project ``h`` (d or n x d) to ``num_primary`` squashed capsules."""
    h = as_tensor(h)
    cfg = layer.config
    if h.shape[-1] != layer.input_dim or h.ndim not in (1, 2):
        raise DimensionError(f"expected feature dim {layer.input_dim}, got shape {h.shape}")
    u = add(matmul(h, layer.w_primary), layer.b_primary)
    return squash(reshape(u, h.shape[:-1] + (cfg.num_primary, cfg.primary_dim)))


def prediction_vectors(layer, u):
    """u_{j|i} = W_ij u_i, shaped (..., primary, label, digit_dim)."""
    u = as_tensor(u)
    if u.ndim == 2:
        return einsum("ip,ijdp->ijd", u, layer.w_digit)
    return einsum("tip,ijdp->tijd", u, layer.w_digit)


def dynamic_routing(u_hat, iterations=3, axis=DIGIT_AXIS, couplings_out=None):
    """Route predictions ``(..., I, J, D)`` to ``J`` digit capsules ``(..., J, D)``.

    Logits start at zero; every iteration normalises them into couplings,
    forms the coupled sum, squashes it and adds the agreement ``u_{j|i} . v_j``
    to the logits.  Gradients flow through every iteration.
    """
    if iterations < 1:
        raise ConfigurationError(f"routing needs at least one iteration, got {iterations}")
    u_hat = as_tensor(u_hat)
    logits = np.zeros(u_hat.shape[:-1])
    soft_axis = -1 if axis == DIGIT_AXIS else -2
    v = None
    for it in range(iterations):
        c = softmax(logits, axis=soft_axis)
        if couplings_out is not None:
            couplings_out.append(c.data)
        s = tsum(mul(reshape(c, c.shape + (1,)), u_hat), axis=-3)
        v = squash(s)
        if it + 1 < iterations:
            v_b = reshape(v, v.shape[:-2] + (1,) + v.shape[-2:])
            logits = add(logits, tsum(mul(u_hat, v_b), axis=-1))
    return v


def label_scores(v):
    """Capsule lengths, one score per label, each in [0, 1)."""
    return norm(v, axis=-1)


def emissions(layer, h, couplings_out=None):
    """n x L matrix of capsule-length scores, one routing problem per position."""
    h = as_tensor(h)
    if h.ndim != 2 or h.shape[0] < 1:
        raise DimensionError(f"emissions need an n x d matrix with n >= 1, got {h.shape}")
    cfg = layer.config
    u = primary_capsules(layer, h)
    u_hat = prediction_vectors(layer, u)
    v = dynamic_routing(u_hat, cfg.routing_iterations, cfg.routing_axis, couplings_out)
    return label_scores(v)
