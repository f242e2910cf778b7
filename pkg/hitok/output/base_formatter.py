"""Classes de base des formats de sortie (rapports texte et fichiers binaires)."""
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict

from ..video_functions import atomic_write, atomic_write_text

logger = logging.getLogger(__name__)


class BaseFormatter(ABC):
    """Classe abstraite pour les rapports texte."""

    @abstractmethod
    def format(self, results: Dict[str, Any]) -> str:
        """
        Formate les résultats pour l'affichage.

        Args:
            results: Résultats du calcul

        Returns:
            Chaîne formatée prête à afficher
        """
        pass

    def save(self, results: Dict[str, Any], filepath: str) -> None:
        atomic_write_text(filepath, self.format(results) + "\n")
        logger.info("rapport sauvegardé : %s", filepath)


class BaseCodec(ABC):
    """Classe abstraite pour les formats binaires (en-tête magique + version)."""

    magic = b''
    version = 1

    @abstractmethod
    def encode(self, obj: Any) -> bytes:
        """Sérialise un objet en octets."""
        pass

    @abstractmethod
    def decode(self, payload: bytes) -> Any:
        """Relit un objet; lève une CodecError sur un contenu invalide."""
        pass

    def save(self, obj: Any, filepath: str) -> None:
        """Écriture atomique: rien n'est écrit si l'encodage échoue."""
        atomic_write(filepath, self.encode(obj))
        logger.debug("%s écrit : %s", self.magic.decode('ascii', 'replace'), filepath)

    def load(self, filepath: str) -> Any:
        with open(filepath, 'rb') as f:
            return self.decode(f.read())
