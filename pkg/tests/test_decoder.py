import itertools
import math

import numpy as np
import pytest

from capsner.corpus import LabelSet, ValidityError, bioes_decode, transition_mask
from capsner.decoder import (
    MASKED,
    LabelError,
    TransitionMatrix,
    log_partition,
    nll_loss,
    sequence_score,
    viterbi_decode,
)
from capsner.numerics import Parameter, Tape, grad_check


def brute_scores(e, A):
    """Score every path with plain Python loops: {path: score}."""
    n, L = e.shape
    out = {}
    for path in itertools.product(range(L), repeat=n):
        s = A[L, path[0]] + A[path[-1], L + 1]
        for t in range(n):
            s += e[t, path[t]]
            if t:
                s += A[path[t - 1], path[t]]
        out[path] = s
    return out


def brute_logsumexp(values):
    values = list(values)
    m = max(values)
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


E2 = np.array([[1.0, 0.0], [0.0, 1.0]])
A0 = np.zeros((4, 4))


def test_score_examples():
    e = np.array([[0.3, 0.7, 0.1]])
    assert sequence_score(e, np.zeros((5, 5)), [1]).item() == 0.7
    assert sequence_score(E2, A0, [0, 1]).item() == 2.0
    rng = np.random.default_rng(0)
    e = rng.normal(size=(4, 3))
    A = rng.normal(size=(5, 5))
    y = [2, 0, 1, 1]
    shifted = sequence_score(e + 1.5, A, y).item()
    assert abs(shifted - (sequence_score(e, A, y).item() + 4 * 1.5)) < 1e-12


def test_score_rejects_bad_labels():
    with pytest.raises(LabelError):
        sequence_score(E2, A0, [0, 2])
    with pytest.raises(LabelError):
        sequence_score(E2, A0, [0])


def test_log_partition_examples():
    assert abs(log_partition(E2, A0).item() - 2.626523) < 1e-6
    e = np.array([[0.2, -1.0, 0.5]])
    assert abs(log_partition(e, np.zeros((5, 5))).item() - brute_logsumexp(e[0])) < 1e-15


def test_nll_examples():
    assert abs(nll_loss(E2, A0, [0, 1]).item() - 0.626523) < 1e-6
    rng = np.random.default_rng(1)
    for n in range(1, 8):
        loss = nll_loss(rng.normal(size=(n, 1)), rng.normal(size=(3, 3)), [0] * n).item()
        assert loss == 0.0


def test_viterbi_examples():
    path, score = viterbi_decode(np.array([[0.9, 0.1]]), A0)
    assert path == [0] and score == 0.9
    path, score = viterbi_decode(E2, A0)
    assert path == [0, 1] and score == 2.0


def test_viterbi_tie_goes_to_lower_index():
    path, _ = viterbi_decode(np.zeros((3, 4)), np.zeros((6, 6)))
    assert path == [0, 0, 0]


def test_oracle_equivalence_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n, L = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        e = rng.normal(size=(n, L)) * 2
        A = rng.normal(size=(L + 2, L + 2))
        scores = brute_scores(e, A)
        best = max(scores, key=lambda p: (scores[p], [-k for k in p]))
        path, score = viterbi_decode(e, A)
        assert tuple(path) == best
        assert abs(score - scores[best]) <= 1e-9
        assert score == sequence_score(e, A, path).item()
        logz = log_partition(e, A).item()
        assert abs(logz - brute_logsumexp(scores.values())) <= 1e-9
        total = math.fsum(math.exp(s - logz) for s in scores.values())
        assert abs(total - 1.0) <= 1e-9
        for p, s in scores.items():
            assert abs(sequence_score(e, A, p).item() - s) <= 1e-12
            if L >= 2:
                assert logz > s


def test_log_partition_without_stop():
    rng = np.random.default_rng(3)
    e, A = rng.normal(size=(3, 2)), rng.normal(size=(4, 4))
    A_nostop = A.copy()
    A_nostop[:, 3] = 0.0
    assert abs(log_partition(e, A, use_stop=False).item() - log_partition(e, A_nostop).item()) < 1e-12


def test_gradients_wrt_emissions_and_transitions():
    rng = np.random.default_rng(4)
    e = Parameter(rng.normal(size=(5, 3)), "e")
    T = TransitionMatrix(3)
    T.A.data[...] = rng.normal(size=(5, 5))
    assert grad_check(lambda: nll_loss(e, T, [2, 0, 0, 1, 2]), [e, T.A]) < 1e-6


def test_masked_entries_fixed_and_gradient_free():
    ls = LabelSet(["PER"])
    mask = transition_mask(ls)
    T = TransitionMatrix(len(ls), mask)
    assert np.all(T.A.data[~mask] == MASKED)
    rng = np.random.default_rng(5)
    e = Parameter(rng.normal(size=(4, len(ls))), "e")
    gold = ls.encode(["B-PER", "E-PER", "O", "S-PER"])
    with Tape() as tape:
        loss = nll_loss(e, T, gold)
    tape.backward(loss)
    assert np.all(T.A.grad[~mask] == 0.0)
    assert np.any(T.A.grad[mask] != 0.0)
    assert np.all(T.effective().data[~mask] == MASKED)


def test_masked_viterbi_never_emits_invalid_sequences():
    ls = LabelSet(["LOC", "PER"])
    T = TransitionMatrix(len(ls), transition_mask(ls))
    rng = np.random.default_rng(6)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        e = rng.uniform(0, 1, size=(n, len(ls)))
        path, _ = viterbi_decode(e, T)
        bioes_decode(ls.decode(path), strict=True)


def test_unmasked_viterbi_can_emit_invalid_sequences():
    ls = LabelSet(["PER"])
    e = np.zeros((1, len(ls)))
    e[0, ls.index("B-PER")] = 1.0
    path, _ = viterbi_decode(e, TransitionMatrix(len(ls)))
    with pytest.raises(ValidityError):
        bioes_decode(ls.decode(path), strict=True)
