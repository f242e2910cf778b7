"""Export des images d'un clip en fichiers PPM (P6, maxval 255)."""
import logging
import os
import re
from typing import List

import numpy as np

from ..errors import BadMagicError, CodecError, ShapeError, TruncatedPayloadError
from .base_formatter import BaseCodec
from .video_file import quantize_u8

logger = logging.getLogger(__name__)

_HEADER = re.compile(rb'P6\s+(\d+)\s+(\d+)\s+(\d+)\s')


def frame_name(index: int) -> str:
    return f"frame_{index:04d}.ppm"


class PpmCodec(BaseCodec):
    """Une image [H, W, C] <-> fichier PPM binaire; C = 1 est répliqué en RGB."""

    magic = b'P6'

    def encode(self, frame: np.ndarray) -> bytes:
        data = quantize_u8(frame)
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ShapeError(f"image [H, W, 1|3] attendue, reçu {data.shape}")
        if data.shape[2] == 1:
            data = np.repeat(data, 3, axis=2)
        h, w, _ = data.shape
        return f"P6\n{w} {h}\n255\n".encode('ascii') + np.ascontiguousarray(data).tobytes()

    def decode(self, payload: bytes) -> np.ndarray:
        if payload[:2] != b'P6':
            raise BadMagicError("fichier PPM P6 attendu")
        match = _HEADER.match(payload)
        if match is None:
            raise CodecError("en-tête PPM invalide")
        w, h, maxval = (int(g) for g in match.groups())
        if maxval != 255:
            raise CodecError(f"maxval {maxval} non supporté")
        body = payload[match.end():]
        if len(body) < w * h * 3:
            raise TruncatedPayloadError("pixels PPM tronqués")
        return np.frombuffer(body[:w * h * 3], dtype=np.uint8).reshape(h, w, 3).copy()


def export_frames(video: np.ndarray, out_dir: str) -> List[str]:
    """
    Écrit une image PPM par image du clip.

    Args:
        video: Clip [T, H, W, C]
        out_dir: Répertoire de sortie (créé si besoin)

    Returns:
        Chemins écrits, dans l'ordre des images
    """
    video = np.asarray(video)
    if video.ndim != 4:
        raise ShapeError(f"clip [T, H, W, C] attendu, reçu {video.shape}")
    os.makedirs(out_dir, exist_ok=True)
    codec = PpmCodec()
    paths = []
    for t, frame in enumerate(video):
        path = os.path.join(out_dir, frame_name(t))
        codec.save(frame, path)
        paths.append(path)
    logger.info("%d images exportées dans %s", len(paths), out_dir)
    return paths
