"""
Quantification sans table (LFQ): le code d'une position est le motif de
signes de son vecteur latent, l'indice est ce motif lu en binaire
(bit i = canal i).
"""
from dataclasses import dataclass

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor, as_tensor
from ..errors import ShapeError

MAX_QUANT_DIM = 63


@dataclass(eq=False)
class LfqCodes:
    """Signes ±1 (avec gradient straight-through) et indices entiers d'une couche."""

    signs: Tensor
    indices: np.ndarray

    @property
    def quant_dim(self) -> int:
        return self.signs.shape[-1]

    @property
    def grid_shape(self):
        return self.indices.shape


def _check_quant_dim(quant_dim: int) -> None:
    if not 1 <= quant_dim <= MAX_QUANT_DIM:
        raise ShapeError(f"quant_dim {quant_dim} hors de [1, {MAX_QUANT_DIM}]")


def _bit_weights(quant_dim: int) -> np.ndarray:
    return np.left_shift(np.int64(1), np.arange(quant_dim, dtype=np.int64))


def signs_to_indices(signs: np.ndarray) -> np.ndarray:
    """Indices [...] à partir des signes [..., qd]: somme des 2^i où le signe i vaut +1."""
    signs = np.asarray(signs)
    _check_quant_dim(signs.shape[-1])
    return ((signs > 0).astype(np.int64) * _bit_weights(signs.shape[-1])).sum(axis=-1)


def index_to_signs(index, quant_dim: int, dtype=np.float64) -> np.ndarray:
    """
    Vecteur de signes d'un indice (ou d'une grille d'indices).

    Args:
        index: Entier ou tableau d'entiers dans [0, 2^quant_dim)
        quant_dim: Nombre de bits

    Returns:
        Tableau [..., quant_dim] de ±1
    """
    _check_quant_dim(quant_dim)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() > (1 << quant_dim) - 1):
        raise ShapeError(f"indice hors de [0, 2^{quant_dim})")
    bits = np.right_shift(index[..., None], np.arange(quant_dim, dtype=np.int64)) & 1
    return np.where(bits == 1, 1.0, -1.0).astype(dtype)


def quantize(z: Tensor, quant_dim: int) -> LfqCodes:
    """
    Quantifie un latent continu [..., qd].

    Le signe de 0 vaut -1; le gradient traverse le signe inchangé.
    """
    z = as_tensor(z)
    if z.shape[-1] != quant_dim:
        raise ShapeError(f"quantize: {z.shape[-1]} canaux pour quant_dim {quant_dim}")
    signs = F.ste_sign(z)
    return LfqCodes(signs, signs_to_indices(signs.data))


def codes_from_indices(indices: np.ndarray, quant_dim: int) -> LfqCodes:
    """Reconstruit des codes constants à partir d'indices lus sur disque."""
    indices = np.asarray(indices, dtype=np.int64)
    return LfqCodes(Tensor(index_to_signs(indices, quant_dim)), indices)


def entropy_penalty(z: Tensor, quant_dim: int, tau: float = 1.0, gamma: float = 1.0) -> Tensor:
    """
    Pénalité d'entropie factorisée par bit.

    p_i = sigmoid(2 z_i / tau); perte = moyenne sur les jetons de sum_i H(p_i)
    moins gamma * sum_i H(moyenne des p_i), H en nats.
    """
    z = as_tensor(z)
    if tau <= 0:
        raise ShapeError(f"entropy_penalty: tau doit être > 0, reçu {tau}")
    if z.shape[-1] != quant_dim:
        raise ShapeError(f"entropy_penalty: {z.shape[-1]} canaux pour quant_dim {quant_dim}")
    tokens = z.size // quant_dim
    probs = F.reshape(F.sigmoid(F.mul(z, 2.0 / tau)), (tokens, quant_dim))
    confidence = F.mean(F.sum(F.binary_entropy(probs), axis=1))
    usage = F.sum(F.binary_entropy(F.mean(probs, axis=0)))
    return F.sub(confidence, F.mul(usage, gamma))
