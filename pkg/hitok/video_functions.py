"""
Utilitaires partagés: écritures atomiques, validations de clips,
conversions d'intensités.
"""
import os
import tempfile
from typing import Sequence, Tuple

import numpy as np


def atomic_write(path: str, payload: bytes) -> None:
    """
    Écrit un fichier en une seule fois (fichier temporaire puis renommage).

    Args:
        path: Chemin de destination
        payload: Contenu complet
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write(path, text.encode('utf-8'))


def is_valid_video(video: np.ndarray) -> bool:
    """Vérifie qu'un clip est un tableau T×H×W×C fini à valeurs dans [0, 1]."""
    if not isinstance(video, np.ndarray) or video.ndim != 4 or min(video.shape) < 1:
        return False
    return bool(np.isfinite(video).all() and video.min() >= 0.0 and video.max() <= 1.0)


def to_signed(video: np.ndarray) -> np.ndarray:
    """[0, 1] -> [-1, 1]."""
    return video * 2.0 - 1.0


def to_unit(values: np.ndarray) -> np.ndarray:
    """[-1, 1] -> [0, 1], borné."""
    return np.clip((values + 1.0) * 0.5, 0.0, 1.0)


def nearest_indices(src: int, dst: int) -> np.ndarray:
    """Indices source du redimensionnement au plus proche voisin src -> dst."""
    return np.minimum((np.arange(dst) * src) // dst, src - 1)


def ceil_div(shape: Sequence[int], stride: Sequence[int]) -> Tuple[int, ...]:
    return tuple(-(-int(n) // int(s)) for n, s in zip(shape, stride))
