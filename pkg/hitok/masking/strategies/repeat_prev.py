"""
Stratégie « répétition »: une position masquée reprend le vecteur de
l'image précédente à la même position spatiale.
"""
from typing import Optional

import numpy as np

from ...core import functional as F
from ...core.tensor import Tensor
from ...errors import StrategyError
from .base import MaskStrategy


class RepeatPrevStrategy(MaskStrategy):
    """Copie le vecteur (éventuellement déjà substitué) de l'image t-1."""

    @property
    def name(self) -> str:
        return "repeat_prev"

    def substitute(self, latent: Tensor, mask: np.ndarray, token: Optional[Tensor]) -> Tensor:
        self.check_token(token)
        if not mask.any():
            return latent
        if mask[..., 0, :, :].any():
            raise StrategyError("l'image 0 ne peut pas être masquée avec 'repeat_prev'")
        source = self.source_positions(mask)
        channels = latent.shape[-1]
        flat = F.reshape(latent, (-1, channels))
        return F.reshape(F.embedding(flat, source.reshape(-1)), latent.shape)

    @staticmethod
    def source_positions(mask: np.ndarray) -> np.ndarray:
        """
        Indice (aplati) de la position dont chaque position copie le vecteur.

        Balayage t croissant: une chaîne de positions masquées remonte
        jusqu'à la dernière image non masquée.
        """
        positions = np.arange(mask.size).reshape(mask.shape)
        source = positions.copy()
        for t in range(1, mask.shape[-3]):
            source[..., t, :, :] = np.where(mask[..., t, :, :], source[..., t - 1, :, :], positions[..., t, :, :])
        return source
