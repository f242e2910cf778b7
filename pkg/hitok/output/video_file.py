"""
Format HTVV des clips: `HTVV`, version u8, T, H, W u16, C u8, puis T*H*W*C
octets (image par image, ligne par ligne, canal en dernier).
"""
import struct

import numpy as np

from ..errors import BadMagicError, CodecError, ShapeError, TruncatedPayloadError, VersionMismatchError
from .base_formatter import BaseCodec

MAGIC = b'HTVV'
VERSION = 1
_HEADER = struct.Struct('<4sBHHHB')


def quantize_u8(video: np.ndarray) -> np.ndarray:
    """Intensités [0, 1] -> octets (arrondi au plus proche); les uint8 passent tels quels."""
    video = np.asarray(video)
    if video.dtype == np.uint8:
        return video
    return np.round(np.clip(video, 0.0, 1.0) * 255.0).astype(np.uint8)


class VideoCodec(BaseCodec):
    """Lecture/écriture des clips en octets."""

    magic = MAGIC
    version = VERSION

    def encode(self, video: np.ndarray) -> bytes:
        data = quantize_u8(video)
        if data.ndim != 4:
            raise ShapeError(f"clip [T, H, W, C] attendu, reçu {data.shape}")
        t, h, w, c = data.shape
        if max(t, h, w) > 0xFFFF or c > 0xFF or min(data.shape) < 1:
            raise CodecError(f"dimensions {data.shape} non représentables")
        return _HEADER.pack(MAGIC, VERSION, t, h, w, c) + np.ascontiguousarray(data).tobytes()

    def decode_u8(self, payload: bytes) -> np.ndarray:
        if len(payload) < 4:
            raise TruncatedPayloadError("fichier vidéo tronqué")
        if payload[:4] != MAGIC:
            raise BadMagicError(f"magie {payload[:4]!r} au lieu de {MAGIC!r}")
        if len(payload) < _HEADER.size:
            raise TruncatedPayloadError("en-tête vidéo tronqué")
        _, version, t, h, w, c = _HEADER.unpack_from(payload)
        if version != VERSION:
            raise VersionMismatchError(f"version {version}, {VERSION} attendue")
        size = t * h * w * c
        body = payload[_HEADER.size:]
        if len(body) < size:
            raise TruncatedPayloadError(f"{len(body)} octets de pixels, {size} attendus")
        if len(body) > size:
            raise CodecError(f"{len(body) - size} octet(s) en trop après les pixels")
        return np.frombuffer(body, dtype=np.uint8).reshape(t, h, w, c).copy()

    def decode(self, payload: bytes) -> np.ndarray:
        """Clip [T, H, W, C] en float64 dans [0, 1] (octet / 255)."""
        return self.decode_u8(payload).astype(np.float64) / 255.0
