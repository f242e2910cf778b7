"""
Format HTVT des flux de jetons.

En-tête: `HTVT`, version u8, nombre de couches u8 (bit 7 = mode masqué),
puis par couche (la plus grossière d'abord) quant_dim u8, T, H, W u16.
En mode masqué suivent un octet de stratégie et un octet de drapeau par
couche. Charge utile: par couche dans l'ordre du flux, une carte de
masque de N bits si la couche est masquée, puis les indices transmis à
quant_dim bits chacun.
"""
import struct
from typing import List

import numpy as np

from ..errors import BadMagicError, CodecError, TruncatedPayloadError, VersionMismatchError
from ..tokenizer.tokens import HierTokenStream, TokenGrid
from .base_formatter import BaseCodec
from .bitstream import BitReader, BitWriter

MAGIC = b'HTVT'
VERSION = 1
MASKED_FLAG = 0x80
STRATEGY_CODES = {'repeat_prev': 0, 'zero': 1, 'learned': 2}
STRATEGY_NAMES = {code: name for name, code in STRATEGY_CODES.items()}
_LAYER = struct.Struct('<BHHH')


def layer_payload_bits(grid: TokenGrid) -> int:
    if grid.mask is None:
        return grid.token_count * grid.quant_dim
    kept = grid.token_count - int(grid.mask.sum())
    return grid.token_count + kept * grid.quant_dim


def payload_bits(stream: HierTokenStream) -> int:
    """Bits utiles de la charge (sans en-tête ni bourrage final)."""
    return sum(layer_payload_bits(grid) for grid in stream.grids)


class TokenStreamCodec(BaseCodec):
    """Lecture/écriture bit-exacte des flux hiérarchiques."""

    magic = MAGIC
    version = VERSION

    def encode(self, stream: HierTokenStream) -> bytes:
        count = stream.num_layers
        if not 1 <= count < MASKED_FLAG:
            raise CodecError(f"{count} couches : entre 1 et 127 attendues")
        masked = stream.is_masked
        header = [MAGIC, struct.pack('<BB', VERSION, count | (MASKED_FLAG if masked else 0))]
        order = stream.stream_order()
        for m in order:
            grid = stream.grids[m]
            if any(n > 0xFFFF for n in grid.shape):
                raise CodecError(f"couche {m} : dimensions {grid.shape} > 65535")
            header.append(_LAYER.pack(grid.quant_dim, *grid.shape))
        if masked:
            if stream.strategy not in STRATEGY_CODES:
                raise CodecError(f"stratégie de masque inconnue : {stream.strategy}")
            header.append(struct.pack('<B', STRATEGY_CODES[stream.strategy]))
            header.append(bytes(int(stream.grids[m].mask is not None) for m in order))

        writer = BitWriter()
        for m in order:
            grid = stream.grids[m]
            indices = grid.indices.reshape(-1)
            if grid.mask is not None:
                flags = grid.mask.reshape(-1)
                writer.write_flags(flags)
                indices = indices[~flags]
            writer.write(indices, grid.quant_dim)
        return b''.join(header) + writer.getvalue()

    def decode(self, payload: bytes) -> HierTokenStream:
        if len(payload) < 6:
            raise TruncatedPayloadError(f"en-tête tronqué ({len(payload)} octets)")
        if payload[:4] != MAGIC:
            raise BadMagicError(f"magie {payload[:4]!r} au lieu de {MAGIC!r}")
        version, raw_count = struct.unpack_from('<BB', payload, 4)
        if version != VERSION:
            raise VersionMismatchError(f"version {version}, {VERSION} attendue")
        masked = bool(raw_count & MASKED_FLAG)
        count = raw_count & ~MASKED_FLAG
        if count < 1:
            raise CodecError("aucune couche")
        offset = 6
        shapes = []
        for _ in range(count):
            if offset + _LAYER.size > len(payload):
                raise TruncatedPayloadError("en-tête de couche tronqué")
            quant_dim, t, h, w = _LAYER.unpack_from(payload, offset)
            if not 1 <= quant_dim <= 63:
                raise CodecError(f"quant_dim {quant_dim} invalide")
            shapes.append((quant_dim, (t, h, w)))
            offset += _LAYER.size
        strategy = None
        flags = [False] * count
        if masked:
            if offset + 1 + count > len(payload):
                raise TruncatedPayloadError("en-tête de masque tronqué")
            code = payload[offset]
            if code not in STRATEGY_NAMES:
                raise CodecError(f"code de stratégie {code} inconnu")
            strategy = STRATEGY_NAMES[code]
            flags = [bool(b) for b in payload[offset + 1:offset + 1 + count]]
            offset += 1 + count

        reader = BitReader(payload[offset:])
        # couches lues de la plus grossière à la plus dense
        grids: List[TokenGrid] = []
        for (quant_dim, shape), has_mask in zip(shapes, flags):
            size = int(np.prod(shape))
            mask = None
            if has_mask:
                mask = reader.read_flags(size)
                indices = np.zeros(size, dtype=np.int64)
                indices[~mask] = reader.read(int((~mask).sum()), quant_dim)
                mask = mask.reshape(shape)
            else:
                indices = reader.read(size, quant_dim)
            grids.append(TokenGrid(quant_dim, indices.reshape(shape), mask))
        if reader.remaining >= 8:
            raise CodecError(f"{reader.remaining // 8} octet(s) en trop après la charge utile")
        grids.reverse()
        return HierTokenStream(grids, strategy)
