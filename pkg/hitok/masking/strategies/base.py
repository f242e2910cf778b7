"""
Classe de base des stratégies de substitution des positions masquées.
Même patron Strategy que le reste du paquet: une classe par stratégie.
"""
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ...core.tensor import Tensor
from ...errors import StrategyError


class MaskStrategy(ABC):
    """Classe abstraite: remplace les vecteurs latents masqués."""

    requires_token = False

    @property
    @abstractmethod
    def name(self) -> str:
        """Nom de la stratégie (clé de configuration)."""
        pass

    @abstractmethod
    def substitute(self, latent: Tensor, mask: np.ndarray, token: Optional[Tensor]) -> Tensor:
        """
        Remplace les positions masquées.

        Args:
            latent: Grille [..., T, H, W, C]
            mask: Booléens [..., T, H, W] (vrai = masqué)
            token: Vecteur appris [C] pour la stratégie 'learned'

        Returns:
            Nouvelle grille de même forme
        """
        pass

    def check_token(self, token: Optional[Tensor]) -> None:
        """Le jeton appris est présent si et seulement si la stratégie l'exige."""
        if self.requires_token and token is None:
            raise StrategyError(f"la stratégie '{self.name}' exige un jeton de masque appris")
        if not self.requires_token and token is not None:
            raise StrategyError(f"la stratégie '{self.name}' n'accepte pas de jeton appris")
