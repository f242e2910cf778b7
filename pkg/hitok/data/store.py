"""
Jeux de données sur disque: `clip_0000.htvv` + légende `clip_0000.txt`.
"""
import glob
import logging
import os
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError
from ..output.video_file import VideoCodec
from ..video_functions import atomic_write_text

logger = logging.getLogger(__name__)


def clip_stem(index: int) -> str:
    return f"clip_{index:04d}"


def write_dataset(items: List[Tuple[np.ndarray, str]], out_dir: str) -> List[str]:
    """Écrit chaque clip (HTVV) et sa légende (UTF-8); retourne les chemins des clips."""
    os.makedirs(out_dir, exist_ok=True)
    codec = VideoCodec()
    paths = []
    for i, (video, caption) in enumerate(items):
        stem = os.path.join(out_dir, clip_stem(i))
        codec.save(video, stem + '.htvv')
        atomic_write_text(stem + '.txt', caption + "\n")
        paths.append(stem + '.htvv')
    logger.info("%d clips écrits dans %s", len(paths), out_dir)
    return paths


def read_dataset(data_dir: str) -> List[Tuple[np.ndarray, str]]:
    """Relit un répertoire écrit par `write_dataset`, dans l'ordre des noms."""
    paths = sorted(glob.glob(os.path.join(data_dir, 'clip_*.htvv')))
    if not paths:
        raise ConfigError(f"aucun clip dans {data_dir}")
    codec = VideoCodec()
    items = []
    for path in paths:
        caption_path = os.path.splitext(path)[0] + '.txt'
        try:
            with open(caption_path, 'r', encoding='utf-8') as f:
                caption = f.read().strip()
        except OSError:
            raise ConfigError(f"légende manquante : {caption_path}") from None
        items.append((codec.load(path), caption))
    return items


def split_holdout(items: List[Tuple[np.ndarray, str]], holdout: int):
    """Les `holdout` derniers éléments servent à l'évaluation."""
    if holdout >= len(items):
        raise ConfigError(f"holdout {holdout} >= taille du jeu {len(items)}")
    if holdout == 0:
        return items, []
    return items[:-holdout], items[-holdout:]
