"""
Grilles de jetons et flux hiérarchique.

L'ordre du flux va de la couche la plus grossière (indice le plus élevé)
à la plus dense (indice 0), chaque couche en ordre raster (t, h, w).
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..config import LayerConfig
from ..errors import ShapeError
from .lfq import index_to_signs


@dataclass(eq=False)
class TokenGrid:
    """Indices d'une couche [T, H, W] et masque optionnel (vrai = non transmis)."""

    quant_dim: int
    indices: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.ndim != 3:
            raise ShapeError(f"grille [T, H, W] attendue, reçu {self.indices.shape}")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() > (1 << self.quant_dim) - 1):
            raise ShapeError(f"indice hors du vocabulaire 2^{self.quant_dim}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.indices.shape:
                raise ShapeError(f"masque {self.mask.shape} pour une grille {self.indices.shape}")

    @property
    def shape(self):
        return self.indices.shape

    @property
    def token_count(self) -> int:
        return self.indices.size

    @property
    def layer_config(self) -> LayerConfig:
        return LayerConfig(self.quant_dim, tuple(self.shape))

    def signs(self) -> np.ndarray:
        return index_to_signs(self.indices, self.quant_dim)

    def equals(self, other: 'TokenGrid') -> bool:
        if self.quant_dim != other.quant_dim or not np.array_equal(self.indices, other.indices):
            return False
        if self.mask is None or other.mask is None:
            return self.mask is None and other.mask is None
        return np.array_equal(self.mask, other.mask)


@dataclass(eq=False)
class HierTokenStream:
    """Toutes les couches d'un clip; `grids[0]` est la plus dense."""

    grids: List[TokenGrid]
    strategy: Optional[str] = None

    @property
    def num_layers(self) -> int:
        return len(self.grids)

    @property
    def is_masked(self) -> bool:
        return any(grid.mask is not None for grid in self.grids)

    def stream_order(self) -> List[int]:
        return list(range(self.num_layers - 1, -1, -1))

    def layer_configs(self) -> List[LayerConfig]:
        return [grid.layer_config for grid in self.grids]

    @property
    def total_tokens(self) -> int:
        return sum(grid.token_count for grid in self.grids)

    def flatten(self) -> np.ndarray:
        """Séquence de jetons dans l'ordre du flux (grossier vers dense)."""
        return np.concatenate([self.grids[m].indices.reshape(-1) for m in self.stream_order()])

    @classmethod
    def from_flat(cls, flat: np.ndarray, layers: List[LayerConfig]) -> 'HierTokenStream':
        """Inverse de `flatten` pour une liste de couches (indice 0 = la plus dense)."""
        flat = np.asarray(flat, dtype=np.int64)
        expected = sum(layer.token_count for layer in layers)
        if flat.shape != (expected,):
            raise ShapeError(f"flux de {flat.size} jetons, {expected} attendus")
        grids: List[Optional[TokenGrid]] = [None] * len(layers)
        offset = 0
        for m in range(len(layers) - 1, -1, -1):
            layer = layers[m]
            chunk = flat[offset:offset + layer.token_count]
            grids[m] = TokenGrid(layer.quant_dim, chunk.reshape(layer.latent_shape))
            offset += layer.token_count
        return cls(grids)

    def equals(self, other: 'HierTokenStream') -> bool:
        return (self.num_layers == other.num_layers and self.strategy == other.strategy
                and all(a.equals(b) for a, b in zip(self.grids, other.grids)))
