"""Linear-chain output layer: path scores, log-partition, NLL and Viterbi.

Label indices ``0..L-1`` are real tags; the transition matrix has two extra
rows/columns, ``L`` for START and ``L+1`` for STOP.
"""

from __future__ import annotations

import numpy as np

from .numerics import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    getitem,
    logsumexp,
    mul,
    record,
    reshape,
    sub,
)

MASKED = -1e4


class LabelError(IndexError):
    pass


class TransitionMatrix:
    """Learned ``(L+2) x (L+2)`` transition scores, optionally hard-masked.

    Masked entries hold ``-1e4`` and are multiplied out of the gradient.
    """

    def __init__(self, num_labels, mask=None, use_stop=True, name="transitions"):
        self.num_labels = num_labels
        self.use_stop = use_stop
        size = num_labels + 2
        init = np.zeros((size, size))
        self.mask = None
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (size, size):
                raise ValueError(f"mask shape {mask.shape} != {(size, size)}")
            self.mask = mask
            init[~mask] = MASKED
        self.A = Parameter(init, name)

    @property
    def start(self):
        return self.num_labels

    @property
    def stop(self):
        return self.num_labels + 1

    def parameters(self):
        return [self.A]

    def effective(self):
        if self.mask is None:
            return self.A
        keep = self.mask.astype(np.float64)
        return add(mul(self.A, keep), (1.0 - keep) * MASKED)


def _parts(A):
    if isinstance(A, TransitionMatrix):
        return A.effective(), A.use_stop
    return as_tensor(A), True


def _path_value(ed, Ad, y, use_stop):
    # left-to-right in the same order as the forward recursion below, so a
    # single-label chain gives log_partition == sequence_score exactly
    L = ed.shape[1]
    total = Ad[L, y[0]] + ed[0, y[0]]
    for t in range(1, len(y)):
        total = total + (Ad[y[t - 1], y[t]] + ed[t, y[t]])
    if use_stop:
        total = total + Ad[y[-1], L + 1]
    return total


def sequence_score(e, A, y, use_stop=None):
    """Sum of transition and emission scores along the label path ``y``."""
    e = as_tensor(e)
    A_t, stop_default = _parts(A)
    use_stop = stop_default if use_stop is None else use_stop
    n, L = e.shape
    y = np.asarray(y, dtype=np.intp)
    if y.shape != (n,):
        raise LabelError(f"path of length {len(y)} for {n} positions")
    if np.any(y < 0) or np.any(y >= L):
        raise LabelError(f"label index out of range [0, {L}) in {y.tolist()}")
    prev = np.concatenate([[L], y[:-1]])
    value = np.array(_path_value(e.data, A_t.data, y, use_stop))

    def backward(g):
        ge = np.zeros(e.shape)
        ge[np.arange(n), y] = g
        gA = np.zeros(A_t.shape)
        np.add.at(gA, (prev, y), g)
        if use_stop:
            gA[y[-1], L + 1] += g
        return ge, gA

    return record(value, (e, A_t), backward)


def log_partition(e, A, use_stop=None):
    """log of the summed exponentiated scores of all L^n paths (forward algorithm)."""
    e = as_tensor(e)
    A_t, stop_default = _parts(A)
    use_stop = stop_default if use_stop is None else use_stop
    n, L = e.shape
    start, stop = L, L + 1
    trans = getitem(A_t, (slice(0, L), slice(0, L)))
    alpha = add(getitem(A_t, (start, slice(0, L))), getitem(e, 0))
    for t in range(1, n):
        step = add(trans, reshape(getitem(e, t), (1, L)))
        alpha = logsumexp(add(reshape(alpha, (L, 1)), step), axis=0)
    if use_stop:
        alpha = add(alpha, getitem(A_t, (slice(0, L), stop)))
    return logsumexp(alpha, axis=0)


def nll_loss(e, A, y, use_stop=None):
    """-log p(y | x) = log_partition - sequence_score."""
    return sub(log_partition(e, A, use_stop), sequence_score(e, A, y, use_stop))


def viterbi_decode(e, A, use_stop=None):
    """Best path and its score; ties go to the lower label index."""
    ed = e.data if isinstance(e, Tensor) else np.asarray(e, dtype=np.float64)
    A_t, stop_default = _parts(A)
    use_stop = stop_default if use_stop is None else use_stop
    Ad = A_t.data
    n, L = ed.shape
    start, stop = L, L + 1
    trans = Ad[:L, :L]
    score = Ad[start, :L] + ed[0]
    back = np.zeros((n, L), dtype=np.intp)
    for t in range(1, n):
        cand = score[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(L)] + ed[t]
    if use_stop:
        score = score + Ad[:L, stop]
    best = int(np.argmax(score))
    path = [best]
    for t in range(n - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    # rescore so the reported value matches sequence_score bit for bit
    value = sequence_score(Tensor(ed), Tensor(Ad), path, use_stop).item()
    return path, value
