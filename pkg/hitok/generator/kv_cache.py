"""Cache clés/valeurs pour le décodage incrémental."""
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ShapeError


class KvCache:
    """Clés et valeurs accumulées par bloc de transformeur, [B, têtes, L, d]."""

    def __init__(self, num_layers: int):
        self.keys: List[Optional[np.ndarray]] = [None] * num_layers
        self.values: List[Optional[np.ndarray]] = [None] * num_layers

    @property
    def length(self) -> int:
        lengths = {0 if k is None else k.shape[2] for k in self.keys}
        if len(lengths) != 1:
            raise ShapeError(f"cache incohérent entre blocs : longueurs {sorted(lengths)}")
        return lengths.pop()

    def past(self, layer: int) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        return self.keys[layer], self.values[layer]

    def store(self, layer: int, keys: np.ndarray, values: np.ndarray) -> None:
        """Remplace l'état d'un bloc par les clés/valeurs complètes (passé + nouvelles)."""
        self.keys[layer] = keys
        self.values[layer] = values
