"""Bidirectional GRU encoder."""

from __future__ import annotations

import numpy as np

from .numerics import (
    DimensionError,
    Parameter,
    add,
    as_tensor,
    concat,
    matmul,
    mul,
    sigmoid,
    stack,
    sub,
    tanh_op,
)


def glorot(rng, shape):
    fan_out, fan_in = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class GRUCell:
    """Weights act on the concatenation ``[h_prev, x_t]`` (hidden part first)."""

    def __init__(self, input_dim, hidden_dim=100, rng=None, name="gru"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        shape = (hidden_dim, hidden_dim + input_dim)
        self.w_r = Parameter(glorot(rng, shape), f"{name}.w_r")
        self.w_z = Parameter(glorot(rng, shape), f"{name}.w_z")
        self.w_h = Parameter(glorot(rng, shape), f"{name}.w_h")
        self.b_r = Parameter(np.zeros(hidden_dim), f"{name}.b_r")
        self.b_z = Parameter(np.zeros(hidden_dim), f"{name}.b_z")
        self.b_h = Parameter(np.zeros(hidden_dim), f"{name}.b_h")

    def parameters(self):
        return [self.w_r, self.w_z, self.w_h, self.b_r, self.b_z, self.b_h]


def cell_step(cell, x_t, h_prev):
    x_t, h_prev = as_tensor(x_t), as_tensor(h_prev)
    if x_t.shape != (cell.input_dim,) or h_prev.shape != (cell.hidden_dim,):
        raise DimensionError(
            f"cell expects x {(cell.input_dim,)} and h {(cell.hidden_dim,)}, "
            f"got {x_t.shape} and {h_prev.shape}"
        )
    hx = concat([h_prev, x_t])
    r = sigmoid(add(matmul(cell.w_r, hx), cell.b_r))
    z = sigmoid(add(matmul(cell.w_z, hx), cell.b_z))
    cand = tanh_op(add(matmul(cell.w_h, concat([mul(r, h_prev), x_t])), cell.b_h))
    # (1 - z) * h_prev + z * cand
    return add(h_prev, mul(z, sub(cand, h_prev)))


class BiGRU:
    def __init__(self, input_dim, hidden_dim=100, rng=None, name="encoder"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.forward_cell = GRUCell(input_dim, hidden_dim, rng, f"{name}.forward")
        self.backward_cell = GRUCell(input_dim, hidden_dim, rng, f"{name}.backward")

    @property
    def output_dim(self):
        return 2 * self.forward_cell.hidden_dim

    def parameters(self):
        return self.forward_cell.parameters() + self.backward_cell.parameters()


def _run(cell, rows):
    h = np.zeros(cell.hidden_dim)
    out = []
    for x_t in rows:
        h = cell_step(cell, x_t, h)
        out.append(h)
    return out


def bigru_forward(layer, x):
    """Return the ``n x 2*hidden`` matrix of ``[forward_t, backward_t]`` rows."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionError(f"bigru_forward needs a non-empty n x input matrix, got {x.shape}")
    rows = [x[t] for t in range(x.shape[0])]
    fwd = _run(layer.forward_cell, rows)
    bwd = _run(layer.backward_cell, rows[::-1])[::-1]
    return concat([stack(fwd), stack(bwd)], axis=1)
