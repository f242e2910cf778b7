"""
Empaquetage de bits MSB en premier.

Les entiers sont écrits bit de poids fort d'abord; le flux est complété
par des zéros jusqu'à l'octet.
"""
from typing import List

import numpy as np

from ..errors import CodecError, TruncatedPayloadError


def _to_bits(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64).reshape(-1)
    if values.size and (values.min() < 0 or (width < 63 and values.max() >= (1 << width))):
        raise CodecError(f"valeur hors de {width} bits")
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


class BitWriter:
    """Accumule des champs de largeur fixe puis produit les octets."""

    def __init__(self):
        self._chunks: List[np.ndarray] = []
        self.bit_length = 0

    def write(self, values: np.ndarray, width: int) -> None:
        bits = _to_bits(values, width)
        self._chunks.append(bits)
        self.bit_length += bits.size

    def write_flags(self, flags: np.ndarray) -> None:
        bits = np.asarray(flags, dtype=bool).reshape(-1).astype(np.uint8)
        self._chunks.append(bits)
        self.bit_length += bits.size

    def getvalue(self) -> bytes:
        if not self._chunks:
            return b''
        return np.packbits(np.concatenate(self._chunks)).tobytes()


class BitReader:
    """Lecture séquentielle de champs de largeur fixe."""

    def __init__(self, payload: bytes):
        self._bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
        self.position = 0

    @property
    def remaining(self) -> int:
        return self._bits.size - self.position

    def _take(self, count: int) -> np.ndarray:
        if count > self.remaining:
            raise TruncatedPayloadError(f"{count} bits demandés, {self.remaining} disponibles")
        bits = self._bits[self.position:self.position + count]
        self.position += count
        return bits

    def read(self, count: int, width: int) -> np.ndarray:
        bits = self._take(count * width).reshape(count, width).astype(np.int64)
        weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
        return (bits * weights).sum(axis=1)

    def read_flags(self, count: int) -> np.ndarray:
        return self._take(count).astype(bool)
