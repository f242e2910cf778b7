"""
Oracle de cohérence légende/clip pour les clips synthétiques.

Premier plan: pixels dont un canal s'écarte de plus de 0.2 de la médiane
de son image. Couleur par canal dominant, mouvement par déplacement du
centroïde, forme par taux de remplissage de la boîte englobante.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .captions import COLORS, parse_caption

FOREGROUND_THRESHOLD = 0.2
SHAPE_FILL = {'square': 1.0, 'circle': math.pi / 4, 'triangle': 0.5}


@dataclass
class OracleResult:
    """Verdict par attribut et attributs détectés."""

    color: bool = False
    shape: bool = False
    motion: bool = False
    detected: Dict[str, Optional[str]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.color and self.shape and self.motion


def foreground(video: np.ndarray) -> np.ndarray:
    """Masque [T, H, W] des pixels de premier plan."""
    median = np.median(video, axis=(1, 2), keepdims=True)
    return (np.abs(video - median) > FOREGROUND_THRESHOLD).any(axis=-1)


def _detect_motion(fg: np.ndarray) -> Optional[str]:
    frames = [t for t in range(fg.shape[0]) if fg[t].any()]
    if len(frames) < 2:
        return None
    first = np.argwhere(fg[frames[0]]).mean(axis=0)
    last = np.argwhere(fg[frames[-1]]).mean(axis=0)
    dy, dx = last - first
    if dy == 0 and dx == 0:
        return None
    if abs(dx) >= abs(dy):
        return 'right' if dx > 0 else 'left'
    return 'down' if dy > 0 else 'up'


def _detect_shape(fg: np.ndarray) -> Optional[str]:
    fills = []
    for frame in fg:
        points = np.argwhere(frame)
        if points.size == 0:
            continue
        (y0, x0), (y1, x1) = points.min(axis=0), points.max(axis=0)
        fills.append(len(points) / ((y1 - y0 + 1) * (x1 - x0 + 1)))
    if not fills:
        return None
    fill = float(np.median(fills))
    return min(SHAPE_FILL, key=lambda name: abs(SHAPE_FILL[name] - fill))


def caption_oracle(video: np.ndarray, caption: str) -> OracleResult:
    """
    Vérifie couleur, forme et mouvement d'un clip contre sa légende.

    Args:
        video: Clip [T, H, W, 3] dans [0, 1]
        caption: Légende au gabarit synthétique

    Returns:
        OracleResult; tout échoue si aucun pixel de premier plan n'est trouvé
    """
    video = np.asarray(video, dtype=np.float64)
    expected = parse_caption(caption)
    fg = foreground(video)
    if not fg.any():
        return OracleResult(detected={'color': None, 'shape': None, 'motion': None})
    channel_votes = np.bincount(video[fg].argmax(axis=-1), minlength=3)
    detected = {
        'color': COLORS[int(channel_votes[:3].argmax())],
        'shape': _detect_shape(fg),
        'motion': _detect_motion(fg),
    }
    return OracleResult(
        color=detected['color'] == expected['color'],
        shape=detected['shape'] == expected['shape'],
        motion=detected['motion'] == expected['motion'],
        detected=detected,
    )
