import math

import numpy as np
import pytest

from hitok.config import LayerConfig
from hitok.core.tensor import Tensor, precision
from hitok.errors import ShapeError
from hitok.tokenizer import HierTokenStream, TokenGrid, entropy_penalty, index_to_signs, quantize, signs_to_indices


@pytest.mark.parametrize("quant_dim", range(1, 13))
def test_code_index_bijection(quant_dim):
    indices = np.arange(1 << quant_dim)
    signs = index_to_signs(indices, quant_dim)
    assert signs.shape == (1 << quant_dim, quant_dim)
    assert set(np.unique(signs)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(signs_to_indices(signs), indices)
    assert len({row.tobytes() for row in signs}) == 1 << quant_dim


def test_bit_order_and_sign_of_zero():
    z = Tensor([[0.3, -0.2, 0.0, 5.0]])
    codes = quantize(z, 4)
    np.testing.assert_array_equal(codes.signs.data, [[1.0, -1.0, -1.0, 1.0]])
    assert codes.indices.tolist() == [1 + 8]
    np.testing.assert_array_equal(index_to_signs(1 << 62, 63)[-1], 1.0)


def test_index_out_of_range():
    with pytest.raises(ShapeError):
        index_to_signs(16, 4)
    with pytest.raises(ShapeError):
        quantize(Tensor(np.zeros((2, 3))), 4)


def test_entropy_at_zero_matches_closed_form(float64):
    for gamma in (0.0, 0.5, 1.0):
        value = entropy_penalty(Tensor(np.zeros((7, 5))), 5, tau=1.0, gamma=gamma).item()
        assert value == pytest.approx((1.0 - gamma) * 5 * math.log(2), abs=1e-6)


def test_entropy_prefers_diverse_codes(float64):
    rng = np.random.default_rng(0)
    diverse = np.where(rng.random((256, 6)) > 0.5, 20.0, -20.0)
    collapsed = np.full((256, 6), 20.0)
    low = entropy_penalty(Tensor(diverse), 6).item()
    high = entropy_penalty(Tensor(collapsed), 6).item()
    assert low < high


def test_stream_order_is_coarse_to_dense():
    dense = TokenGrid(4, np.arange(8).reshape(2, 2, 2))
    coarse = TokenGrid(2, np.array([[[3]]]))
    stream = HierTokenStream([dense, coarse])
    assert stream.flatten().tolist() == [3, 0, 1, 2, 3, 4, 5, 6, 7]
    assert stream.total_tokens == 9
    layers = [LayerConfig(4, (2, 2, 2)), LayerConfig(2, (1, 1, 1))]
    assert HierTokenStream.from_flat(stream.flatten(), layers).equals(stream)


def test_token_grid_validation():
    with pytest.raises(ShapeError):
        TokenGrid(2, np.array([[[4]]]))
    with pytest.raises(ShapeError):
        TokenGrid(2, np.zeros((2, 2), dtype=int))
    with pytest.raises(ShapeError):
        TokenGrid(2, np.zeros((1, 2, 2), dtype=int), mask=np.zeros((1, 2), dtype=bool))


@pytest.mark.parametrize("scale", [1e-30, 1e-6, 0.5, 3.0, 1e6, 1e30])
def test_indices_ignore_positive_scaling(scale):
    z = np.random.default_rng(7).normal(size=(64, 10))
    with precision(np.float64):
        reference = quantize(Tensor(z), 10).indices
        scaled = quantize(Tensor(z * scale), 10).indices
    np.testing.assert_array_equal(scaled, reference)
