"""Stratégies de substitution pour le décodage masqué."""
from .base import MaskStrategy
from .repeat_prev import RepeatPrevStrategy
from .zero import ZeroStrategy
from .learned import LearnedStrategy
from ...errors import StrategyError

STRATEGIES = {
    strategy.name: strategy
    for strategy in (RepeatPrevStrategy(), ZeroStrategy(), LearnedStrategy())
}


def get_strategy(name: str) -> MaskStrategy:
    """Retourne la stratégie enregistrée sous `name`."""
    try:
        return STRATEGIES[name]
    except KeyError:
        raise StrategyError(f"stratégie de masque inconnue : {name}") from None


__all__ = ['MaskStrategy', 'RepeatPrevStrategy', 'ZeroStrategy', 'LearnedStrategy', 'STRATEGIES', 'get_strategy']
