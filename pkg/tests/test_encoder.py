import numpy as np
import pytest

from capsner.encoder import BiGRU, GRUCell, bigru_forward, cell_step
from capsner.numerics import DimensionError, grad_check


def zero_cell(input_dim=3, hidden_dim=4):
    cell = GRUCell(input_dim, hidden_dim)
    for p in cell.parameters():
        p.data[...] = 0.0
    return cell


def reference_step(cell, x, h):
    """Plain numpy transcription of the gate equations."""
    sig = lambda a: 1.0 / (1.0 + np.exp(-a))
    hx = np.concatenate([h, x])
    r = sig(cell.w_r.data @ hx + cell.b_r.data)
    z = sig(cell.w_z.data @ hx + cell.b_z.data)
    cand = np.tanh(cell.w_h.data @ np.concatenate([r * h, x]) + cell.b_h.data)
    return (1 - z) * h + z * cand


def test_zero_cell_halves_state_exactly():
    cell = zero_cell()
    rng = np.random.default_rng(0)
    h = rng.normal(size=4)
    for _ in range(10):
        nxt = cell_step(cell, rng.normal(size=3), h).data
        assert np.array_equal(nxt, 0.5 * h)
        h = nxt


def test_zero_cell_zero_state_fixed_point():
    cell = zero_cell()
    for x in np.random.default_rng(1).normal(size=(5, 3)):
        assert not cell_step(cell, x, np.zeros(4)).data.any()


def test_cell_matches_reference():
    rng = np.random.default_rng(3)
    cell = GRUCell(3, 5, rng)
    for p in cell.parameters():
        p.data[...] = rng.normal(size=p.shape)
    x, h = rng.normal(size=3), rng.normal(size=5)
    assert np.allclose(cell_step(cell, x, h).data, reference_step(cell, x, h), atol=1e-14)


def test_cell_shape_errors():
    cell = GRUCell(3, 4)
    with pytest.raises(DimensionError):
        cell_step(cell, np.zeros(2), np.zeros(4))
    with pytest.raises(DimensionError):
        cell_step(cell, np.zeros(3), np.zeros(5))


def test_three_step_unroll_gradient():
    rng = np.random.default_rng(4)
    cell = GRUCell(3, 4, rng)
    for p in cell.parameters():
        p.data[...] = rng.normal(scale=0.5, size=p.shape)
    xs = rng.normal(size=(3, 3))

    def loss():
        h = np.zeros(4)
        for x in xs:
            h = cell_step(cell, x, h)
        return h.sum()

    for p in cell.parameters():
        assert grad_check(loss, [p]) < 1e-4, p.name


def test_single_position_halves_are_one_step():
    layer = BiGRU(3, 4, np.random.default_rng(5))
    x = np.random.default_rng(6).normal(size=(1, 3))
    out = bigru_forward(layer, x).data
    assert out.shape == (1, 8)
    fwd = cell_step(layer.forward_cell, x[0], np.zeros(4)).data
    bwd = cell_step(layer.backward_cell, x[0], np.zeros(4)).data
    assert np.array_equal(out[0, :4], fwd)
    assert np.array_equal(out[0, 4:], bwd)


def test_reversal_symmetry_with_tied_cells():
    layer = BiGRU(3, 4, np.random.default_rng(7))
    for a, b in zip(layer.forward_cell.parameters(), layer.backward_cell.parameters()):
        b.data[...] = a.data
    x = np.random.default_rng(8).normal(size=(6, 3))
    out = bigru_forward(layer, x).data
    rev = bigru_forward(layer, x[::-1].copy()).data
    swapped = np.concatenate([out[::-1, 4:], out[::-1, :4]], axis=1)
    assert np.allclose(rev, swapped, atol=1e-14)


def test_directional_independence():
    layer = BiGRU(3, 4, np.random.default_rng(9))
    rng = np.random.default_rng(10)
    x = rng.normal(size=(7, 3))
    base = bigru_forward(layer, x).data
    for t in range(7):
        bumped = x.copy()
        bumped[t] += rng.normal(size=3)
        out = bigru_forward(layer, bumped).data
        # forward half only sees positions <= its own, backward half >= its own
        assert np.array_equal(out[:t, :4], base[:t, :4])
        assert np.array_equal(out[t + 1 :, 4:], base[t + 1 :, 4:])
        assert not np.allclose(out[t:, :4], base[t:, :4])
        assert not np.allclose(out[: t + 1, 4:], base[: t + 1, 4:])


def test_zero_parameters_give_zero_output():
    layer = BiGRU(3, 4)
    for p in layer.parameters():
        p.data[...] = 0.0
    assert not bigru_forward(layer, np.ones((5, 3))).data.any()


def test_empty_sequence_rejected():
    with pytest.raises(DimensionError):
        bigru_forward(BiGRU(3, 4), np.zeros((0, 3)))
