"""
Vocabulaire fermé des légendes synthétiques.

Gabarit: "a {color} {shape} moves {motion}". Une légende est encodée
<bos> + mots, complétée à droite par <pad>; une légende plus longue que
le préfixe texte est refusée.
"""
from typing import Dict, Optional

import numpy as np

from ..errors import ConfigError

COLORS = ('red', 'green', 'blue')
SHAPES = ('square', 'circle', 'triangle')
MOTIONS = ('left', 'right', 'up', 'down')

PAD, BOS, UNCOND, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ('<pad>', '<bos>', '<uncond>', '<unk>')
VOCAB = SPECIAL_TOKENS + ('a', 'moves') + COLORS + SHAPES + MOTIONS
WORD_IDS = {word: i for i, word in enumerate(VOCAB)}
VOCAB_SIZE = len(VOCAB)


def make_caption(color: str, shape: str, motion: str) -> str:
    return f"a {color} {shape} moves {motion}"


def encode_caption(caption: str, length: int = 8) -> np.ndarray:
    """Identifiants [length] d'une légende (mots inconnus -> <unk>)."""
    ids = [BOS] + [WORD_IDS.get(word, UNK) for word in caption.lower().split()]
    if len(ids) > length:
        raise ConfigError(f"légende de {len(ids) - 1} mots : au plus {length - 1} pour un préfixe texte de {length}")
    return np.array(ids + [PAD] * (length - len(ids)), dtype=np.int64)


def parse_caption(caption: str) -> Dict[str, Optional[str]]:
    """Attributs nommés dans une légende (None si absent)."""
    words = caption.lower().split()
    return {
        'color': next((w for w in words if w in COLORS), None),
        'shape': next((w for w in words if w in SHAPES), None),
        'motion': next((w for w in words if w in MOTIONS), None),
    }
