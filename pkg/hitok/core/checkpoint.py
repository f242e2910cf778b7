"""
Format de checkpoint « HTCK ».

    magic 'HTCK' | u8 version=1 | u32 nombre de paramètres
    par paramètre: u16 longueur du nom | nom UTF-8 | u8 rang | rang × u32 dims
                   | charge utile float32 little-endian

Tous les entiers sont little-endian.
"""
import struct
from collections import OrderedDict
from typing import Dict

import numpy as np

from ..errors import BadMagicError, TruncatedPayloadError, VersionMismatchError
from ..video_functions import atomic_write
from .params import ParamStore

MAGIC = b'HTCK'
VERSION = 1


def encode_checkpoint(state: Dict[str, np.ndarray]) -> bytes:
    """Sérialise un dictionnaire nom -> tableau."""
    chunks = [MAGIC, struct.pack('<BI', VERSION, len(state))]
    for name, values in state.items():
        raw_name = name.encode('utf-8')
        values = np.asarray(values)
        chunks.append(struct.pack('<H', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<B', values.ndim))
        chunks.append(struct.pack(f'<{values.ndim}I', *values.shape))
        chunks.append(values.astype('<f4').tobytes())
    return b''.join(chunks)


class _Reader:
    """Lecture séquentielle avec détection de troncature."""

    def __init__(self, payload: bytes):
        self.payload = payload
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.payload):
            raise TruncatedPayloadError(f"fin de fichier à l'octet {len(self.payload)}, {count} octets attendus")
        chunk = self.payload[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes) -> 'OrderedDict[str, np.ndarray]':
    """Désérialise un checkpoint complet (aucun résultat partiel en cas d'erreur)."""
    reader = _Reader(payload)
    if len(payload) < 4 or reader.take(4) != MAGIC:
        raise BadMagicError("magic 'HTCK' attendu")
    version, count = reader.unpack('<BI')
    if version != VERSION:
        raise VersionMismatchError(f"version {version}, {VERSION} attendue")
    state: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        (rank,) = reader.unpack('<B')
        dims = reader.unpack(f'<{rank}I') if rank else ()
        size = int(np.prod(dims)) if dims else 1
        values = np.frombuffer(reader.take(4 * size), dtype='<f4').reshape(dims)
        state[name] = values.astype(np.float32)
    return state


def save_checkpoint(store: ParamStore, path: str) -> None:
    atomic_write(path, encode_checkpoint(store.state_dict()))


def load_checkpoint(path: str) -> 'OrderedDict[str, np.ndarray]':
    with open(path, 'rb') as f:
        return decode_checkpoint(f.read())
