"""Programme progressif: couches grossières d'abord, puis toute la hiérarchie."""
from typing import FrozenSet

from ..errors import ConfigError


def progressive_stage(step: int, total: int, boundary: float = 0.3, num_layers: int = 3) -> FrozenSet[int]:
    """
    Couches actives à une étape.

    Avant `boundary * total`, seules les couches 1..M-1 sont actives (la
    couche 0 est remplacée par le substitut appris); ensuite toutes le sont.
    Une hiérarchie à une seule couche est toujours entièrement active.
    """
    if not 0 <= step < total:
        raise ConfigError(f"étape {step} hors de [0, {total})")
    if num_layers > 1 and step < boundary * total:
        return frozenset(range(1, num_layers))
    return frozenset(range(num_layers))
