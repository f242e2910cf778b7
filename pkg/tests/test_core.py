import numpy as np
import pytest

from hitok.core import functional as F
from hitok.core.checkpoint import decode_checkpoint, encode_checkpoint
from hitok.core.gradcheck import max_relative_error
from hitok.core.params import ParamStore, adam_step
from hitok.core.tensor import Tensor, no_grad
from hitok.errors import BadMagicError, MissingGradientError, NonFiniteError, ShapeError, TruncatedPayloadError

SEEDS = range(5)
TOLERANCE = 1e-5


def leaf(rng, *shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _cases(rng):
    """(nom, fonction de perte, entrées) pour chaque opération différentiable."""
    a, b = leaf(rng, 3, 4), leaf(rng, 3, 4)
    row = leaf(rng, 4)
    pos = leaf(rng, 3, 4, low=0.5, high=2.0)
    m1, m2 = leaf(rng, 2, 3, 4), leaf(rng, 2, 4, 5)
    x, w, bias = leaf(rng, 2, 3, 4), leaf(rng, 4, 5), leaf(rng, 5)
    weights = Tensor(rng.normal(size=(3, 4)))
    ln_x, gamma, beta = leaf(rng, 2, 3, 6), leaf(rng, 6), leaf(rng, 6)
    gn_x, gn_g, gn_b = leaf(rng, 1, 2, 3, 3, 4), leaf(rng, 4), leaf(rng, 4)
    cv_x, cv_k, cv_b = leaf(rng, 1, 4, 5, 5, 2), leaf(rng, 3, 3, 3, 2, 3), leaf(rng, 3)
    tc_x, tc_k = leaf(rng, 1, 2, 3, 3, 2), leaf(rng, 3, 3, 3, 2, 2)
    q, k, v = leaf(rng, 1, 2, 3, 4), leaf(rng, 1, 2, 5, 4), leaf(rng, 1, 2, 5, 4)
    rot = leaf(rng, 2, 5, 8)
    angles = rng.uniform(0, 3, size=(5, 8))
    logits = leaf(rng, 6, 7)
    targets = rng.integers(0, 7, size=6)
    table = leaf(rng, 5, 3)
    ids = np.array([[0, 4, 4], [2, 1, 0]])
    grid, token = leaf(rng, 2, 3, 4), leaf(rng, 4)
    mask = np.array([[True, False, True], [False, False, True]])
    probs = leaf(rng, 3, 4, low=0.1, high=0.9)
    return [
        ('add', lambda: F.mul(F.add(a, row), weights).sum(), [a, row]),
        ('sub', lambda: F.mul(F.sub(a, b), weights).sum(), [a, b]),
        ('mul', lambda: F.mul(F.mul(a, b), weights).sum(), [a, b]),
        ('pow', lambda: F.mul(F.power(pos, 1.5), weights).sum(), [pos]),
        ('mean', lambda: F.mean(F.mul(a, a), axis=1).sum(), [a]),
        ('matmul', lambda: F.matmul(m1, m2).sum(), [m1, m2]),
        ('linear', lambda: F.mul(F.linear(x, w, bias), F.linear(x, w, bias)).sum(), [x, w, bias]),
        ('silu', lambda: F.mul(F.silu(a), weights).sum(), [a]),
        ('gelu', lambda: F.mul(F.gelu(a), weights).sum(), [a]),
        ('sigmoid', lambda: F.mul(F.sigmoid(a), weights).sum(), [a]),
        ('softmax', lambda: F.mul(F.softmax(a, axis=-1), weights).sum(), [a]),
        ('cross_entropy', lambda: F.cross_entropy(logits, targets), [logits]),
        ('layer_norm', lambda: F.mul(F.layer_norm(ln_x, gamma, beta), ln_x).sum(), [ln_x, gamma, beta]),
        ('group_norm', lambda: F.mul(F.group_norm_frames(gn_x, gn_g, gn_b, 2), gn_x).sum(), [gn_x, gn_g, gn_b]),
        ('causal_conv3d', lambda: F.power(F.causal_conv3d(cv_x, cv_k, cv_b, (2, 2, 1)), 2).sum(),
         [cv_x, cv_k, cv_b]),
        ('transpose_conv3d', lambda: F.power(F.transpose_causal_conv3d(tc_x, tc_k, None, (2, 2, 2)), 2).sum(),
         [tc_x, tc_k]),
        ('attention', lambda: F.power(F.scaled_dot_product_attention(q, k, v, offset=2), 2).sum(), [q, k, v]),
        ('rotary', lambda: F.mul(F.rotary(rot, np.cos(angles), np.sin(angles), [(0, 4), (4, 2), (6, 2)]),
                                 rot).sum(), [rot]),
        ('embedding', lambda: F.power(F.embedding(table, ids), 2).sum(), [table]),
        ('getitem', lambda: F.power(F.getitem(a, [0, 2, 2]), 2).sum(), [a]),
        ('concat', lambda: F.mul(F.concat([a, b], axis=1), F.concat([b, a], axis=1)).sum(), [a, b]),
        ('masked_substitute', lambda: F.power(F.masked_substitute(grid, mask, token), 2).sum(), [grid, token]),
        ('binary_entropy', lambda: F.mul(F.binary_entropy(probs), weights).sum(), [probs]),
    ]


@pytest.mark.parametrize("seed", SEEDS)
def test_gradients_match_finite_differences(float64, seed):
    rng = np.random.default_rng(seed)
    for name, fn, inputs in _cases(rng):
        error = max_relative_error(fn, inputs)
        assert error < TOLERANCE, f"{name}: erreur relative {error:.2e}"


def test_straight_through_sign(float64):
    x = Tensor([-0.5, 0.0, 2.0], requires_grad=True)
    y = F.ste_sign(x)
    np.testing.assert_array_equal(y.data, [-1.0, -1.0, 1.0])
    F.mul(y, Tensor([1.0, 2.0, 3.0])).sum().backward()
    np.testing.assert_array_equal(x.grad, [1.0, 2.0, 3.0])


def _reference_conv(x, kernel, stride):
    """Convolution causale directe, boucle par boucle."""
    kt, kh, kw, cin, cout = kernel.shape
    st, sh, sw = stride
    b, t, h, w, _ = x.shape
    top, left = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (kt - 1, 0), (top, kh - 1 - top), (left, kw - 1 - left), (0, 0)))
    out = np.zeros((b, -(-t // st), -(-h // sh), -(-w // sw), cout))
    for to in range(out.shape[1]):
        for ho in range(out.shape[2]):
            for wo in range(out.shape[3]):
                patch = xp[:, to * st:to * st + kt, ho * sh:ho * sh + kh, wo * sw:wo * sw + kw, :]
                out[:, to, ho, wo, :] = np.einsum('bijkc,ijkcd->bd', patch, kernel)
    return out


@pytest.mark.parametrize("stride", [(1, 1, 1), (2, 2, 2), (1, 2, 1), (2, 1, 2)])
def test_causal_conv_matches_direct_loop(float64, stride):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 5, 6, 7, 3))
    kernel = rng.normal(size=(3, 3, 3, 3, 4))
    out = F.causal_conv3d(Tensor(x), Tensor(kernel), stride=stride)
    np.testing.assert_allclose(out.data, _reference_conv(x, kernel, stride), atol=1e-10)


@pytest.mark.parametrize("stride", [1, 2])
def test_causal_conv_ignores_future_frames(float64, stride):
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, 8, 4, 4, 2))
    kernel = Tensor(rng.normal(size=(3, 3, 3, 2, 2)))
    base = F.causal_conv3d(Tensor(x), kernel, stride=(stride, 1, 1)).data
    for cut in range(1, 8):
        perturbed = x.copy()
        perturbed[:, cut:] += rng.normal(size=perturbed[:, cut:].shape)
        out = F.causal_conv3d(Tensor(perturbed), kernel, stride=(stride, 1, 1)).data
        visible = (cut - 1) // stride + 1
        np.testing.assert_array_equal(out[:, :visible], base[:, :visible])


@pytest.mark.parametrize("stride", [(1, 1, 1), (2, 2, 2), (2, 1, 1), (1, 2, 2)])
def test_transpose_conv_matches_stuffed_loop(float64, stride):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 3, 3, 4, 2))
    kernel = rng.normal(size=(3, 3, 3, 2, 3))
    st, sh, sw = stride
    b, t, h, w, c = x.shape
    stuffed = np.zeros((b, t * st, h * sh, w * sw, c))
    for ti in range(t):
        for hi in range(h):
            for wi in range(w):
                stuffed[:, ti * st, hi * sh, wi * sw, :] = x[:, ti, hi, wi, :]
    out = F.transpose_causal_conv3d(Tensor(x), Tensor(kernel), stride=stride)
    assert out.shape == (b, t * st, h * sh, w * sw, 3)
    np.testing.assert_allclose(out.data, _reference_conv(stuffed, kernel, (1, 1, 1)), atol=1e-10)


def test_transpose_conv_is_causal(float64):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 4, 2, 2, 2))
    kernel = Tensor(rng.normal(size=(3, 3, 3, 2, 2)))
    base = F.transpose_causal_conv3d(Tensor(x), kernel, stride=(2, 2, 2)).data
    assert base.shape == (1, 8, 4, 4, 2)
    perturbed = x.copy()
    perturbed[:, 2:] += 1.0
    out = F.transpose_causal_conv3d(Tensor(perturbed), kernel, stride=(2, 2, 2)).data
    # l'image de sortie t dépend des entrées <= floor(t/2)
    np.testing.assert_array_equal(out[:, :4], base[:, :4])
    assert not np.array_equal(out[:, 4:], base[:, 4:])


def test_group_norm_never_mixes_frames(float64):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(1, 3, 4, 4, 4))
    g, b = Tensor(np.ones(4)), Tensor(np.zeros(4))
    base = F.group_norm_frames(Tensor(x), g, b, 2).data
    x[:, 2] *= 10.0
    out = F.group_norm_frames(Tensor(x), g, b, 2).data
    np.testing.assert_array_equal(out[:, :2], base[:, :2])


def test_attention_offset_matches_full_sequence(float64):
    rng = np.random.default_rng(5)
    q, k, v = (Tensor(rng.normal(size=(1, 2, 6, 4))) for _ in range(3))
    full = F.scaled_dot_product_attention(q, k, v).data
    tail = F.scaled_dot_product_attention(q[:, :, 4:], k, v, offset=4).data
    np.testing.assert_allclose(tail, full[:, :, 4:], atol=1e-12)


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = F.mul(x, 2.0)
    assert not y.requires_grad


def test_non_finite_values_are_rejected():
    with pytest.raises(NonFiniteError):
        F.mul(Tensor([1.0]), np.inf)


def test_backward_requires_scalar():
    with pytest.raises(ShapeError):
        F.mul(Tensor(np.ones(3), requires_grad=True), 2.0).backward()


def test_adam_minimizes_quadratic():
    store = ParamStore(seed=0)
    x = store.create('x', (4,), init='ones')
    target = np.array([0.5, -1.0, 2.0, 0.0])
    for _ in range(500):
        store.zero_grad()
        F.power(F.sub(x, target), 2).sum().backward()
        adam_step(store, lr=0.05)
    np.testing.assert_allclose(x.data, target, atol=5e-2)


def test_adam_without_gradients_fails():
    store = ParamStore()
    store.create('w', (2, 2))
    with pytest.raises(MissingGradientError):
        adam_step(store)


def test_checkpoint_round_trip_and_errors():
    store = ParamStore(seed=3)
    store.create('encoder.kernel', (3, 3, 3, 2, 4))
    store.create('decoder.bias', (4,), init='zeros')
    payload = encode_checkpoint(store.state_dict())
    state = decode_checkpoint(payload)
    assert list(state) == ['encoder.kernel', 'decoder.bias']
    np.testing.assert_array_equal(state['encoder.kernel'], store['encoder.kernel'].data.astype(np.float32))
    with pytest.raises(BadMagicError):
        decode_checkpoint(b'NOPE' + payload[4:])
    with pytest.raises(TruncatedPayloadError):
        decode_checkpoint(payload[:-3])
