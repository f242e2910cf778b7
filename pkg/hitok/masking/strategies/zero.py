"""Stratégie « zéro »: les positions masquées deviennent le vecteur nul."""
from typing import Optional

import numpy as np

from ...core import functional as F
from ...core.tensor import Tensor
from .base import MaskStrategy


class ZeroStrategy(MaskStrategy):
    """Écrit des zéros aux positions masquées."""

    @property
    def name(self) -> str:
        return "zero"

    def substitute(self, latent: Tensor, mask: np.ndarray, token: Optional[Tensor]) -> Tensor:
        self.check_token(token)
        if not mask.any():
            return latent
        return F.masked_substitute(latent, mask)
