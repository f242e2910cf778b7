"""
Opérations différentiables du moteur de tenseurs.

Chaque opération calcule sa sortie avec numpy et enregistre une fonction
`backward(grad) -> gradients des parents`. Aucune diffusion implicite
n'est acceptée en dehors de l'ajout d'un biais (dimensions finales) et
des scalaires.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tensor, as_tensor

Stride = Tuple[int, int, int]

_GELU_C = math.sqrt(2.0 / math.pi)


# ---------------------------------------------------------------------------
# Utilitaires
# ---------------------------------------------------------------------------

def _broadcast_ok(a: Tuple[int, ...], b: Tuple[int, ...]) -> bool:
    if a == b:
        return True
    for small, big in ((a, b), (b, a)):
        if len(small) == 0 or small == (1,):
            return True
        if len(small) < len(big) and big[len(big) - len(small):] == small:
            return True
    return False


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Réduit un gradient diffusé vers la forme d'origine."""
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary_operands(a, b, op: str) -> Tuple[Tensor, Tensor]:
    a, b = as_tensor(a), as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeError(f"{op}: formes incompatibles {a.shape} et {b.shape}")
    return a, b


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None for i in items)


# ---------------------------------------------------------------------------
# Arithmétique élémentaire
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b, 'sub')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b, 'mul')

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, 'mul')


def neg(x: Tensor) -> Tensor:
    x = as_tensor(x)
    return Tensor.from_op(-x.data, (x,), lambda g: (-g,), 'neg')


def power(x: Tensor, exponent: float) -> Tensor:
    x = as_tensor(x)
    exponent = float(exponent)

    def backward(g):
        return (g * exponent * x.data ** (exponent - 1.0),)

    return Tensor.from_op(x.data ** exponent, (x,), backward, 'pow')


def abs(x: Tensor) -> Tensor:  # noqa: A001 - même nom que numpy
    x = as_tensor(x)
    return Tensor.from_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), 'abs')


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Borne les valeurs; le gradient est nul hors de l'intervalle."""
    x = as_tensor(x)
    inside = (x.data >= low) & (x.data <= high)
    return Tensor.from_op(np.clip(x.data, low, high), (x,), lambda g: (g * inside,), 'clip')


# ---------------------------------------------------------------------------
# Réductions et manipulations de forme
# ---------------------------------------------------------------------------

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(np.asarray(out), (x,), backward, 'sum')


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    return Tensor.from_op(x.data.reshape(tuple(shape)), (x,), lambda g: (g.reshape(original),), 'reshape')


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),), 'transpose')


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: liste vide")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis):
            raise ShapeError(f"concat: formes incompatibles {[t.shape for t in tensors]}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, 'concat')


def getitem(x: Tensor, index) -> Tensor:
    """Indexation (tranches ou tableaux d'indices) avec gradient par dispersion."""
    x = as_tensor(x)
    basic = _is_basic_index(index)

    def backward(g):
        grad = np.zeros_like(x.data)
        if basic:
            grad[index] = g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(np.array(x.data[index]), (x,), backward, 'getitem')


def embedding(table: Tensor, ids) -> Tensor:
    """Sélectionne les lignes `ids` d'une table [V, D]."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding: table de rang 2 attendue, reçu {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding: indice hors de [0, {table.shape[0]})")

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return Tensor.from_op(table.data[ids], (table,), backward, 'embedding')


# ---------------------------------------------------------------------------
# Algèbre linéaire
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Produit matriciel par lots; les dimensions de tête doivent coïncider."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: formes incompatibles {a.shape} @ {b.shape}")

    def backward(g):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, 'matmul')


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Application affine sur la dernière dimension: x[..., i] @ w[i, o] + b[o]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: {x.shape} incompatible avec le poids {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: biais {bias.shape} au lieu de ({weight.shape[1]},)")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, weight.shape[0])
    out = x2 @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        g2 = g.reshape(-1, weight.shape[1])
        grads = [(g2 @ weight.data.T).reshape(x.shape), x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out.reshape(lead + (weight.shape[1],)), parents, backward, 'linear')


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return Tensor.from_op(s, (x,), lambda g: (g * s * (1.0 - s),), 'sigmoid')


def silu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)

    def backward(g):
        return (g * s * (1.0 + x.data * (1.0 - s)),)

    return Tensor.from_op(x.data * s, (x,), backward, 'silu')


def gelu(x: Tensor) -> Tensor:
    """GELU, approximation tanh."""
    x = as_tensor(x)
    v = x.data
    t = np.tanh(_GELU_C * (v + 0.044715 * v ** 3))

    def backward(g):
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * dt),)

    return Tensor.from_op(0.5 * v * (1.0 + t), (x,), backward, 'gelu')


def ste_sign(x: Tensor) -> Tensor:
    """Signe avec sign(0) = -1; le gradient traverse inchangé (straight-through)."""
    x = as_tensor(x)
    out = np.where(x.data > 0, 1.0, -1.0).astype(x.dtype)
    return Tensor.from_op(out, (x,), lambda g: (g,), 'ste_sign')


def binary_entropy(p: Tensor) -> Tensor:
    """Entropie binaire en nats, p borné dans [eps, 1 - eps]."""
    p = as_tensor(p)
    eps = np.finfo(p.dtype).eps
    pc = np.clip(p.data, eps, 1.0 - eps)
    out = -(pc * np.log(pc) + (1.0 - pc) * np.log(1.0 - pc))
    return Tensor.from_op(out, (p,), lambda g: (g * np.log((1.0 - pc) / pc),), 'binary_entropy')


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool = True) -> Tensor:
    """Dropout inversé; identité hors entraînement ou pour rate = 0."""
    x = as_tensor(x)
    if not training or rate <= 0.0 or rng is None:
        return x
    if rate >= 1.0:
        scale = np.zeros_like(x.data)
    else:
        scale = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return Tensor.from_op(x.data * scale, (x,), lambda g: (g * scale,), 'dropout')


# ---------------------------------------------------------------------------
# Softmax, entropie croisée
# ---------------------------------------------------------------------------

def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax; les positions où `mask` est faux reçoivent une probabilité nulle."""
    x = as_tensor(x)
    scores = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(p, (x,), backward, 'softmax')


def log_softmax_np(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Entropie croisée moyenne à partir des logits [N, V] et des cibles entières [N]."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape}, cibles {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ShapeError("cross_entropy: cible hors vocabulaire")
    n = logits.shape[0]
    logp = log_softmax_np(logits.data)
    rows = np.arange(n)
    loss = -logp[rows, targets].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return (grad * (g / n),)

    return Tensor.from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward, 'cross_entropy')


# ---------------------------------------------------------------------------
# Normalisations
# ---------------------------------------------------------------------------

def _normalize(xr: np.ndarray, axes: Tuple[int, ...], eps: float):
    mu = xr.mean(axis=axes, keepdims=True)
    var = xr.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    return (xr - mu) * inv, inv


def _normalize_backward(dxhat: np.ndarray, xhat: np.ndarray, inv: np.ndarray, axes, count: int) -> np.ndarray:
    return inv / count * (count * dxhat
                          - dxhat.sum(axis=axes, keepdims=True)
                          - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x = as_tensor(x)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: paramètres {gamma.shape}/{beta.shape} pour {d} canaux")
    xhat, inv = _normalize(x.data, (-1,), eps)
    lead = tuple(range(x.ndim - 1))

    def backward(g):
        dxhat = g * gamma.data
        gx = _normalize_backward(dxhat, xhat, inv, (-1,), d)
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor.from_op(xhat * gamma.data + beta.data, (x, gamma, beta), backward, 'layer_norm')


def group_norm_frames(x: Tensor, gamma: Tensor, beta: Tensor, groups: int, eps: float = 1e-5) -> Tensor:
    """
    Normalisation par groupes de canaux, image par image.

    Les statistiques portent sur (H, W, canaux du groupe) de chaque image:
    aucune image ne voit les suivantes, la causalité temporelle est préservée.

    Args:
        x: Tenseur [..., T, H, W, C]
        gamma, beta: Paramètres [C]
        groups: Nombre de groupes (doit diviser C)
    """
    x = as_tensor(x)
    if x.ndim < 4:
        raise ShapeError(f"group_norm_frames: rang >= 4 attendu, reçu {x.shape}")
    *lead, h, w, c = x.shape
    if c % groups:
        raise ShapeError(f"group_norm_frames: {groups} groupes pour {c} canaux")
    cg = c // groups
    xr = x.data.reshape(tuple(lead) + (h * w, groups, cg))
    axes = (-3, -1)
    count = h * w * cg
    xhat_r, inv = _normalize(xr, axes, eps)
    xhat = xhat_r.reshape(x.shape)
    outer = tuple(range(x.ndim - 1))

    def backward(g):
        dxhat = (g * gamma.data).reshape(xr.shape)
        gx = _normalize_backward(dxhat, xhat_r, inv, axes, count).reshape(x.shape)
        return gx, (g * xhat).sum(axis=outer), g.sum(axis=outer)

    return Tensor.from_op(xhat * gamma.data + beta.data, (x, gamma, beta), backward, 'group_norm')


# ---------------------------------------------------------------------------
# Convolutions causales 3D
# ---------------------------------------------------------------------------

def _check_stride(stride) -> Stride:
    stride = tuple(int(s) for s in stride)
    if len(stride) != 3 or any(s < 1 for s in stride):
        raise ShapeError(f"pas invalide : {stride}")
    return stride


def conv_padding(kernel_size: Tuple[int, int, int]):
    """Rembourrage causal: (kt-1) images avant le clip, spatial symétrique."""
    kt, kh, kw = kernel_size
    top, left = (kh - 1) // 2, (kw - 1) // 2
    return (kt - 1, 0), (top, kh - 1 - top), (left, kw - 1 - left)


def causal_conv3d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None,
                  stride: Stride = (1, 1, 1)) -> Tensor:
    """
    Convolution 3D causale.

    Args:
        x: Entrée [B, T, H, W, Cin] (ou [T, H, W, Cin])
        kernel: Noyau [kt, kh, kw, Cin, Cout]
        bias: Biais [Cout] optionnel
        stride: Pas (st, sh, sw)

    Returns:
        Sortie [B, ceil(T/st), ceil(H/sh), ceil(W/sw), Cout]; l'image t
        ne dépend que des images d'entrée <= t*st.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    st, sh, sw = _check_stride(stride)
    unbatched = x.ndim == 4
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 5 or kernel.ndim != 5 or kernel.shape[3] != x.shape[-1]:
        raise ShapeError(f"causal_conv3d: entrée {x.shape}, noyau {kernel.shape}")
    kt, kh, kw, _, cout = kernel.shape
    if min(kt, kh, kw) < 1:
        raise ShapeError(f"causal_conv3d: noyau vide {kernel.shape}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"causal_conv3d: biais {bias.shape} au lieu de ({cout},)")

    _, t, h, w, _ = x.shape
    pad_t, pad_h, pad_w = conv_padding((kt, kh, kw))
    xp = np.pad(x.data, ((0, 0), pad_t, pad_h, pad_w, (0, 0)))
    windows = sliding_window_view(xp, (kt, kh, kw), axis=(1, 2, 3))[:, ::st, ::sh, ::sw]
    out = np.tensordot(windows, kernel.data, axes=([5, 6, 7, 4], [0, 1, 2, 3]))
    if bias is not None:
        out = out + bias.data
    _, to, ho, wo, _ = out.shape

    def backward(g):
        gk = np.tensordot(windows, g, axes=([0, 1, 2, 3], [0, 1, 2, 3])).transpose(1, 2, 3, 0, 4)
        gwin = np.tensordot(g, kernel.data, axes=([4], [4]))
        gxp = np.zeros_like(xp)
        for i in range(kt):
            for j in range(kh):
                for k in range(kw):
                    gxp[:, i:i + st * (to - 1) + 1:st,
                        j:j + sh * (ho - 1) + 1:sh,
                        k:k + sw * (wo - 1) + 1:sw, :] += gwin[:, :, :, :, i, j, k, :]
        gx = gxp[:, pad_t[0]:, pad_h[0]:pad_h[0] + h, pad_w[0]:pad_w[0] + w, :]
        grads = [gx, gk]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1, 2, 3)))
        return grads

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    out = Tensor.from_op(out, parents, backward, 'causal_conv3d')
    return reshape(out, out.shape[1:]) if unbatched else out


def zero_stuff(x: Tensor, stride: Stride) -> Tensor:
    """Insère des zéros: la valeur d'entrée (t, h, w) va en (t*st, h*sh, w*sw)."""
    x = as_tensor(x)
    st, sh, sw = _check_stride(stride)
    *lead, t, h, w, c = x.shape
    out = np.zeros(tuple(lead) + (t * st, h * sh, w * sw, c), dtype=x.dtype)
    index = (Ellipsis, slice(None, None, st), slice(None, None, sh), slice(None, None, sw), slice(None))
    out[index] = x.data
    return Tensor.from_op(out, (x,), lambda g: (np.ascontiguousarray(g[index]),), 'zero_stuff')


def transpose_causal_conv3d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None,
                            stride: Stride = (1, 1, 1)) -> Tensor:
    """
    Convolution transposée causale: insertion de zéros puis convolution causale de pas 1.

    La sortie a la forme de l'entrée multipliée par le pas; l'image t ne
    dépend que des images d'entrée <= floor(t/st).
    """
    return causal_conv3d(zero_stuff(x, stride), kernel, bias, (1, 1, 1))


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------

def causal_mask(query_len: int, key_len: int, offset: int = 0) -> np.ndarray:
    """Masque [Lq, Lk]: la requête i (position absolue offset+i) voit les clés j <= offset+i."""
    return np.arange(key_len)[None, :] <= (offset + np.arange(query_len))[:, None]


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor, offset: int = 0) -> Tensor:
    """
    Attention causale.

    Args:
        q: Requêtes [B, heads, Lq, d]
        k, v: Clés et valeurs [B, heads, Lk, d]
        offset: Position absolue de la première requête
    """
    if q.ndim != 4 or k.shape != v.shape or q.shape[:2] != k.shape[:2] or q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: q {q.shape}, k {k.shape}, v {v.shape}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))), scale)
    mask = np.broadcast_to(causal_mask(q.shape[2], k.shape[2], offset), scores.shape)
    return matmul(softmax(scores, axis=-1, mask=mask), v)


def rotary(x: Tensor, cos: np.ndarray, sin: np.ndarray, blocks: Sequence[Tuple[int, int]]) -> Tensor:
    """
    Rotation par blocs (convention « rotate half » dans chaque bloc).

    Args:
        x: Vecteurs [..., S, D]
        cos, sin: Tables [S, D]
        blocks: (début, taille) de chaque bloc d'axe, tailles paires
    """
    x = as_tensor(x)
    if cos.shape != x.shape[-2:] or sin.shape != x.shape[-2:]:
        raise ShapeError(f"rotary: tables {cos.shape} pour {x.shape}")

    def rotate_half(a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        for start, size in blocks:
            half = size // 2
            out[..., start:start + half] = -a[..., start + half:start + size]
            out[..., start + half:start + size] = a[..., start:start + half]
        return out

    def backward(g):
        return (g * cos - rotate_half(g * sin),)

    return Tensor.from_op(x.data * cos + rotate_half(x.data) * sin, (x,), backward, 'rotary')


# ---------------------------------------------------------------------------
# Substitution de positions (masquage dynamique)
# ---------------------------------------------------------------------------

def masked_substitute(x: Tensor, mask: np.ndarray, token: Optional[Tensor] = None) -> Tensor:
    """
    Remplace les vecteurs masqués par `token` (ou par zéro).

    Args:
        x: Grille [..., C]
        mask: Booléens de forme x.shape[:-1]
        token: Vecteur [C] optionnel
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:-1]:
        raise ShapeError(f"masked_substitute: masque {mask.shape} pour {x.shape}")
    out = x.data.copy()
    out[mask] = 0.0 if token is None else token.data
    keep = (~mask)[..., None]

    def backward(g):
        grads = [g * keep]
        if token is not None:
            grads.append(g[mask].sum(axis=0))
        return grads

    parents: List[Tensor] = [x] if token is None else [x, token]
    return Tensor.from_op(out, parents, backward, 'masked_substitute')
