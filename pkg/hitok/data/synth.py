"""
Générateur procédural de clips: une forme colorée qui se déplace en ligne
droite sur un fond gris. Tout est déterministe pour une graine donnée.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError
from .captions import COLORS, MOTIONS, SHAPES, make_caption

logger = logging.getLogger(__name__)

BACKGROUND = 0.5
MIN_SIZE, MAX_SIZE = 8, 12
COLOR_RGB = {'red': (1.0, 0.0, 0.0), 'green': (0.0, 1.0, 0.0), 'blue': (0.0, 0.0, 1.0)}
MOTION_STEP = {'left': (0, -1), 'right': (0, 1), 'up': (-1, 0), 'down': (1, 0)}


@dataclass(frozen=True)
class SceneSpec:
    """Une scène: forme, couleur, direction, vitesse (px/image), taille, coin de départ (y, x)."""

    shape: str
    color: str
    motion: str
    speed: int = 1
    size: int = 10
    start: Tuple[int, int] = (0, 0)
    background: float = BACKGROUND

    def validate(self) -> None:
        if self.shape not in SHAPES or self.color not in COLORS or self.motion not in MOTIONS:
            raise ConfigError(f"scène invalide : {self.shape}/{self.color}/{self.motion}")
        if self.speed < 0 or self.size < 1:
            raise ConfigError(f"vitesse {self.speed} ou taille {self.size} invalide")

    @property
    def caption(self) -> str:
        return make_caption(self.color, self.shape, self.motion)

    def position(self, t: int) -> Tuple[int, int]:
        dy, dx = MOTION_STEP[self.motion]
        return self.start[0] + dy * self.speed * t, self.start[1] + dx * self.speed * t


def shape_mask(shape: str, size: int) -> np.ndarray:
    """Occupation booléenne [size, size] de la forme dans sa boîte englobante."""
    yy, xx = np.mgrid[0:size, 0:size]
    if shape == 'square':
        return np.ones((size, size), dtype=bool)
    if shape == 'circle':
        center = (size - 1) / 2.0
        return (yy - center) ** 2 + (xx - center) ** 2 <= (size / 2.0) ** 2
    if shape == 'triangle':
        return xx <= yy
    raise ConfigError(f"forme inconnue : {shape}")


def make_clip(spec: SceneSpec, frames: int, height: int, width: int) -> Tuple[np.ndarray, str]:
    """
    Rasterise une scène.

    Returns:
        (clip [T, H, W, 3] dans [0, 1], légende)
    """
    spec.validate()
    video = np.full((frames, height, width, 3), spec.background, dtype=np.float64)
    mask = shape_mask(spec.shape, spec.size)
    color = np.array(COLOR_RGB[spec.color])
    for t in range(frames):
        y, x = spec.position(t)
        if y < 0 or x < 0 or y + spec.size > height or x + spec.size > width:
            raise ConfigError(f"l'objet sort du cadre à l'image {t} ({y}, {x})")
        video[t, y:y + spec.size, x:x + spec.size][mask] = color
    return video, spec.caption


def random_spec(rng: np.random.Generator, frames: int, height: int, width: int, speed: int = 1) -> SceneSpec:
    """Tire une scène uniforme dans la grammaire, en gardant l'objet dans le cadre."""
    shape = SHAPES[rng.integers(len(SHAPES))]
    color = COLORS[rng.integers(len(COLORS))]
    motion = MOTIONS[rng.integers(len(MOTIONS))]
    dy, dx = MOTION_STEP[motion]
    travel = speed * (frames - 1)
    extents = (height, width)
    limit = min(MAX_SIZE, *(extent - travel * abs(step) for extent, step in zip(extents, (dy, dx))))
    if limit < 1:
        raise ConfigError(f"clip {frames}x{height}x{width} trop petit pour un déplacement de {travel} px")
    size = int(rng.integers(min(MIN_SIZE, limit), limit + 1))
    start = []
    for extent, step in zip(extents, (dy, dx)):
        low = travel if step < 0 else 0
        high = extent - size - (travel if step > 0 else 0)
        start.append(int(rng.integers(low, high + 1)))
    return SceneSpec(shape, color, motion, speed, size, (start[0], start[1]))


def dataset(seed: int, count: int, frames: int, height: int, width: int) -> List[Tuple[np.ndarray, str]]:
    """`count` paires (clip, légende) tirées avec une graine fixe."""
    if count < 1:
        raise ConfigError(f"count doit être >= 1, reçu {count}")
    rng = np.random.default_rng(seed)
    specs = [random_spec(rng, frames, height, width) for _ in range(count)]
    logger.debug("jeu synthétique : %d clips %dx%dx%d (graine %d)", count, frames, height, width, seed)
    return [make_clip(spec, frames, height, width) for spec in specs]
