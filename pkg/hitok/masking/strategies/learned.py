"""Stratégie « jeton appris »: un vecteur appris par couche remplace les positions masquées."""
from typing import Optional

import numpy as np

from ...core import functional as F
from ...core.tensor import Tensor
from .base import MaskStrategy


class LearnedStrategy(MaskStrategy):
    """Écrit le jeton de masque appris de la couche."""

    requires_token = True

    @property
    def name(self) -> str:
        return "learned"

    def substitute(self, latent: Tensor, mask: np.ndarray, token: Optional[Tensor]) -> Tensor:
        self.check_token(token)
        if not mask.any():
            return latent
        return F.masked_substitute(latent, mask, token)
