"""
Encodage positionnel rotatif 3D: la dimension de tête est partagée entre
les axes t, h et w; chaque bloc tourne ses paires selon sa coordonnée.
"""
from typing import List, Sequence, Tuple

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor
from ..errors import ShapeError

DEFAULT_BASE = 10000.0


def check_allocation(allocation: Sequence[int], head_dim: int) -> None:
    if len(allocation) != 3 or any(d < 0 or d % 2 for d in allocation) or sum(allocation) != head_dim:
        raise ShapeError(f"allocation {tuple(allocation)} : trois tailles paires de somme {head_dim} attendues")


def axis_blocks(allocation: Sequence[int]) -> List[Tuple[int, int]]:
    blocks, start = [], 0
    for size in allocation:
        blocks.append((start, int(size)))
        start += int(size)
    return blocks


def rope_tables(positions: np.ndarray, allocation: Sequence[int], base: float = DEFAULT_BASE):
    """
    Tables cos/sin [S, D] pour des coordonnées [S, 3].

    Dans un bloc de taille d, la paire (j, j + d/2) tourne de l'angle
    pos * base^(-2j/d).
    """
    positions = np.asarray(positions, dtype=np.float64)
    head_dim = int(sum(allocation))
    check_allocation(allocation, head_dim)
    cos = np.ones((positions.shape[0], head_dim))
    sin = np.zeros((positions.shape[0], head_dim))
    for axis, (start, size) in enumerate(axis_blocks(allocation)):
        if size == 0:
            continue
        half = size // 2
        freqs = base ** (-np.arange(half) * 2.0 / size)
        angles = positions[:, axis:axis + 1] * freqs[None, :]
        for offset in (start, start + half):
            cos[:, offset:offset + half] = np.cos(angles)
            sin[:, offset:offset + half] = np.sin(angles)
    return cos, sin


def rope3d(x: Tensor, positions: np.ndarray, allocation: Sequence[int], base: float = DEFAULT_BASE) -> Tensor:
    """
    Applique la rotation à des vecteurs de tête [..., S, D].

    Args:
        x: Requêtes ou clés
        positions: Coordonnées (t, h, w) des S positions
        allocation: (d_t, d_h, d_w), paires, de somme D
    """
    check_allocation(allocation, x.shape[-1])
    cos, sin = rope_tables(positions, allocation, base)
    return F.rotary(x, cos.astype(x.dtype), sin.astype(x.dtype), axis_blocks(allocation))
